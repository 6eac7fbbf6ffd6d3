from .errors import CapacityBoundsError, ConvergenceError, ValidationError
from .helpers import format_line, to_units
