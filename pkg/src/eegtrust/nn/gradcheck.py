from __future__ import annotations

import numpy as np

from .tensor import Tensor


def numeric_grad(f, arrays, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arrays`` (mutated in place)."""
    out = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f())
            flat[i] = orig - h
            fm = float(f())
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``, maximised."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def grad_check(f, tensors, h=1e-5, floor=1e-6):
    """Compare reverse-mode gradients of ``f`` with central finite differences.

    ``f`` takes no arguments and returns a scalar :class:`Tensor` built from
    ``tensors`` (leaf tensors with ``requires_grad``, 64-bit).  Returns the
    maximum relative error over all coordinates of all tensors.
    """
    tensors = list(tensors)
    for t in tensors:
        if t.data.dtype != np.float64:
            raise TypeError("grad_check requires 64-bit tensors")
        t.grad = None
    loss = f()
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def value():
        v = f()
        return v.data if isinstance(v, Tensor) else v

    numeric = numeric_grad(value, [t.data for t in tensors], h)
    return max(relative_error(a, n, floor) for a, n in zip(analytic, numeric))
