"""Kernel backend selection.

The compiled extension (``_core``, Cython) is preferred when importable;
otherwise the numpy fallback is used. ``STATAGE_KERNEL`` overrides:
``c`` forces the extension (ImportError if missing), ``python`` forces
the fallback, ``auto`` (default) picks the extension when available.
"""

import os

_requested = os.environ.get("STATAGE_KERNEL", "auto").lower()

if _requested not in ("auto", "c", "python"):
    raise ValueError(
        f"STATAGE_KERNEL={_requested!r} not understood (use auto, c, or python)"
    )

if _requested == "python":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "c":
            raise
        from . import _fallback as _impl

lambert_w0 = _impl.lambert_w0
lambert_w0_exp = _impl.lambert_w0_exp
lambert_w0_arr = _impl.lambert_w0_arr
policy_rates = _impl.policy_rates
power_expectation = _impl.power_expectation
rate_expectation = _impl.rate_expectation
log_mgf_num = _impl.log_mgf_num
tdma_delta = _impl.tdma_delta


def backend_name() -> str:
    """Name of the active kernel backend: 'c' or 'python'."""
    return _impl.BACKEND
