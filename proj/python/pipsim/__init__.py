"""Processing-in-pixel image sensor simulator."""

from ._pipsim import *  # noqa: F401,F403
from ._pipsim import __version__  # noqa: F401
