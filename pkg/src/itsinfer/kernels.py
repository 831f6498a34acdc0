"""Backend selection for the hot ARMA recursion kernels.

The compiled extension (``_ckernels``) is used when it imports; otherwise,
or when the environment variable ``ITSINFER_PURE_PYTHON`` is set to a
non-empty value other than ``0``, the numpy/scipy fallback is used.
"""

import os

from . import _pykernels

if os.environ.get("ITSINFER_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
is_stable = _impl.is_stable
expand = _impl.expand
whiten = _impl.whiten
color = _impl.color
residuals = _impl.residuals
css_value = _impl.css_value
profile_css = _impl.profile_css
ProfileProblem = _impl.ProfileProblem

__all__ = [
    "BACKEND", "is_stable", "expand", "whiten", "color",
    "residuals", "css_value", "profile_css", "ProfileProblem", "backends",
]


def backends():
    """Return every importable backend module, compiled first."""
    mods = []
    try:
        from . import _ckernels
        mods.append(_ckernels)
    except ImportError:
        pass
    mods.append(_pykernels)
    return mods
