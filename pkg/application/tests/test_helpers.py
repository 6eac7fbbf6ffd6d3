import math

import pytest

from utils.errors import ValidationError
from utils.helpers import check_units, format_line, format_value, to_units


def test_to_units():
    assert to_units(math.log(2.0), 'bits') == 1.0
    assert to_units(0.25, 'nats') == 0.25
    assert to_units(None, 'bits') is None


def test_unknown_units():
    with pytest.raises(ValidationError):
        check_units('dits')


def test_format_value():
    assert format_value(1.0) == '1'
    assert format_value(math.pi, digits=4) == '3.142'
    assert format_value(None) == ''


def test_format_line_keeps_order():
    line = format_line({'sigma': 1.0, 'converged': True, 'grids': '16,32', 'richardson': None})
    assert line == 'sigma=1 converged=True grids=16,32 richardson='
