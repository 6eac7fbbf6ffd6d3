import json
import logging
import math
from pathlib import Path

from subconvolutive import IntrinsicVolumeSequence
from utils.errors import ValidationError

NEG_INF = "-inf"


def _encode(value):
    if value == -math.inf:
        return NEG_INF
    return float(value)


def _decode(value, n, j):
    if value == NEG_INF:
        return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"log_mu[{n}][{j}] must be a number or \"{NEG_INF}\", got {value!r}")
    return float(value)


def _reject_constant(name):
    raise ValidationError(f"non-finite JSON constant {name} is not allowed; write -inf as \"{NEG_INF}\"")


def sequence_to_dict(seq):
    return {
        'n_max': seq.n_max,
        'log_mu': [[_encode(v) for v in row] for row in seq.log_mu],
    }


def sequence_from_dict(data):
    """Build a validated sequence from the decoded JSON document."""
    if not isinstance(data, dict) or 'n_max' not in data or 'log_mu' not in data:
        raise ValidationError("sequence file must be an object with 'n_max' and 'log_mu'")
    n_max = data['n_max']
    if isinstance(n_max, bool) or not isinstance(n_max, int):
        raise ValidationError(f"n_max must be an integer, got {n_max!r}")
    rows = data['log_mu']
    if not isinstance(rows, list):
        raise ValidationError("log_mu must be a list of rows")
    decoded = []
    for n, row in enumerate(rows, start=1):
        if not isinstance(row, list):
            raise ValidationError(f"log_mu row {n} must be a list")
        decoded.append([_decode(value, n, j) for j, value in enumerate(row)])
    return IntrinsicVolumeSequence(n_max, tuple(decoded))


def save_sequence(seq, path):
    """Write a sequence as JSON; -inf entries become the string "-inf"."""
    path = Path(path)
    with open(path, 'w') as f:
        json.dump(sequence_to_dict(seq), f, allow_nan=False)
    logging.info(f"Saved sequence with n_max={seq.n_max} to {path}")


def load_sequence(path):
    """Read a sequence file, rejecting NaN and sequences that violate μ_n(0), μ_n(n) > 0."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f, parse_constant=_reject_constant)
    except FileNotFoundError as e:
        raise ValidationError(f"sequence file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"sequence file {path} is not valid JSON: {e}") from e
    return sequence_from_dict(data)
