"""Arithmetic helpers shared by the numeric (numpy) and symbolic (CasADi) paths.

Kinematics and dynamics are written once against these helpers so that the
same formula feeds unit tests with floats and NLP construction with ``SX``.
Vectors are anything indexable by 0..2 (numpy arrays, CasADi column vectors,
tuples of per-component arrays).
"""

from __future__ import annotations

import casadi as ca
import numpy as np

_SYMBOLIC = (ca.SX, ca.MX, ca.DM)


def is_symbolic(*values) -> bool:
    for v in values:
        if isinstance(v, _SYMBOLIC):
            return True
        if isinstance(v, (list, tuple)) and is_symbolic(*v):
            return True
    return False


def vec(*components):
    """Stack scalar components into a column (SX) or an ndarray."""
    if is_symbolic(*components):
        return ca.vertcat(*components)
    return np.stack([np.asarray(c, dtype=float) for c in components], axis=-1)


def comps(v, n: int = 3) -> tuple:
    """Split a vector into components; ndarray inputs may carry leading batch axes."""
    if isinstance(v, np.ndarray) and v.ndim > 1:
        return tuple(v[..., i] for i in range(n))
    return tuple(v[i] for i in range(n))


def dot(a, b):
    a, b = comps(a), comps(b)
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a, b):
    a, b = comps(a), comps(b)
    return vec(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def scale(v, k):
    c = comps(v)
    return vec(c[0] * k, c[1] * k, c[2] * k)


def add(*vs):
    cs = [comps(v) for v in vs]
    return vec(*(sum(c[i] for c in cs) for i in range(3)))


def sub(a, b):
    a, b = comps(a), comps(b)
    return vec(a[0] - b[0], a[1] - b[1], a[2] - b[2])


def norm(v):
    return dot(v, v) ** 0.5


def sqrt(x):
    return x ** 0.5


def sin(x):
    return ca.sin(x) if is_symbolic(x) else np.sin(x)


def cos(x):
    return ca.cos(x) if is_symbolic(x) else np.cos(x)


def matvec(rows, v):
    """Multiply a 3x3 matrix given as three row vectors by ``v``."""
    return vec(dot(rows[0], v), dot(rows[1], v), dot(rows[2], v))


def to_numpy(x) -> np.ndarray:
    if isinstance(x, ca.DM):
        return np.asarray(x.full()).reshape(-1)
    return np.asarray(x, dtype=float)
