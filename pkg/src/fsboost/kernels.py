"""Backend selection for the convolution kernels.

The compiled ``_ckernels`` module is used when it imports; otherwise the numpy
implementation in ``_pykernels`` takes over. Set ``FSBOOST_BACKEND=python`` to
force the fallback.
"""
import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("FSBOOST_BACKEND", "").lower() == "python" or compiled_backend is None:
    active = _pykernels
else:
    active = compiled_backend

BACKEND = active.BACKEND


def available_backends():
    out = {"python": _pykernels}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out


def conv2d(x, weight, bias, pad):
    return active.conv2d(x, weight, bias, pad)


def conv2d_backward(x, weight, grad_out, pad, need_input=True):
    return active.conv2d_backward(x, weight, grad_out, pad, need_input)
