import math

from utils.errors import ValidationError

UNITS = ('bits', 'nats')


def check_units(units):
    if units not in UNITS:
        raise ValidationError(f"units must be one of {UNITS}, got {units!r}")
    return units


def to_units(value, units):
    """Convert a rate in nats to the requested units; None passes through."""
    check_units(units)
    if value is None:
        return None
    return value / math.log(2.0) if units == 'bits' else value


def format_value(value, digits=8):
    if value is None:
        return ''
    return f"{value:.{digits}g}"


def format_line(fields, digits=8):
    """Render an ordered mapping as 'key=value' pairs for single-line CLI output."""
    parts = []
    for key, value in fields.items():
        if isinstance(value, float) or value is None:
            value = format_value(value, digits)
        parts.append(f"{key}={value}")
    return ' '.join(parts)
