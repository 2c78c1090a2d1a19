"""Python bindings for the saddle_scope C++ library.

Functions that produce records (Lyapunov estimates, run records, phase grids)
return the same JSON or CSV text the CLI writes; the helpers below decode them.
"""

import json

from ._core import *  # noqa: F401,F403
from ._core import estimate_max_lyapunov, run_linearized, run_uv_model

__version__ = "0.1.0"


def lyapunov(ensemble, lr, protocol=None):
    """Estimate the maximal Lyapunov exponent and return it as a dict."""
    if protocol is None:
        protocol = LyapunovProtocol()  # noqa: F405
    return json.loads(estimate_max_lyapunov(ensemble, lr, protocol))


def linearized_run(*args, **kwargs):
    return json.loads(run_linearized(*args, **kwargs))


def uv_run(*args, **kwargs):
    return json.loads(run_uv_model(*args, **kwargs))
