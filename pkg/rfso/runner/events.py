# rfso/runner/events.py
from enum import Enum, auto


class RunEvent(Enum):
    # Run lifecycle
    RUN_START = auto()          # data: {'timestamp', 'command'}
    RUN_END = auto()            # data: {'timestamp', 'status': 'success'|'failure', 'reason': str (optional)}

    # Grid evaluation
    POINT_EVALUATED = auto()    # data: {'timestamp', 'variant', 'abscissa_db', 'output', 'elapsed'}
    EVALUATOR_ERROR = auto()    # data: {'timestamp', 'variant', 'abscissa_db', 'output', 'error_type', 'error'}

    # Validation
    CHECK_COMPLETED = auto()    # data: {'timestamp', 'quantity', 'status': 'PASS'|'FAIL'|'SKIPPED'|'INFO', 'delta', 'tolerance'}
