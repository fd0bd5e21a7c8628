"""Kernel-based identification of dynamic systems with regularization networks."""

from ._errors import *  # noqa: F401,F403
from .hyper import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .mercer import *  # noqa: F401,F403
from .rn import *  # noqa: F401,F403
from .signals import *  # noqa: F401,F403
from .stability import *  # noqa: F401,F403
from .bench import *  # noqa: F401,F403

__version__ = "0.1.0"
