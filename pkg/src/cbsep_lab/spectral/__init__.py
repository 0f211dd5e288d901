"""Exact finite-state analysis of CBSEP, FA-1f and generalised CBSEP."""
from .states import *  # noqa: F401,F403
from .generators import *  # noqa: F401,F403
from .forms import *  # noqa: F401,F403
from .analysis import *  # noqa: F401,F403
