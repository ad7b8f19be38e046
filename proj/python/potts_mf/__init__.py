from ._potts import *  # noqa: F401,F403
from ._potts import __doc__  # noqa: F401
