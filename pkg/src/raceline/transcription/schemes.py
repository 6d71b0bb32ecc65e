"""Gauss-Legendre collocation and RK4 shooting on a single finite element."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

MAX_DEGREE = 9


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class CollocationScheme:
    """``kind`` is ``"gauss_legendre"`` (``degree`` points) or ``"rk4"`` (``substeps`` per element)."""

    kind: str = "gauss_legendre"
    degree: int = 7
    substeps: int = 1

    def __post_init__(self):
        if self.kind not in ("gauss_legendre", "rk4"):
            raise SchemeError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "gauss_legendre" and not 1 <= self.degree <= MAX_DEGREE:
            raise SchemeError(f"unsupported degree {self.degree}; supported 1..{MAX_DEGREE}")
        if self.substeps < 1:
            raise SchemeError("substeps must be >= 1")

    @property
    def is_collocation(self) -> bool:
        return self.kind == "gauss_legendre"

    @property
    def label(self) -> str:
        if self.is_collocation:
            return f"gauss_legendre(d={self.degree})"
        return f"rk4(substeps={self.substeps})"

    @property
    def coefficients(self) -> "GaussLegendre":
        return gauss_legendre(self.degree)


@dataclass(frozen=True)
class GaussLegendre:
    """Collocation matrices on the unit interval.

    ``tau[0] = 0`` is the element start, ``tau[1:]`` the Legendre roots.
    ``C[r, j]``: derivative of Lagrange basis ``r`` at root ``j``.
    ``D[r]``: basis ``r`` at ``tau = 1``.  ``B[j]``: quadrature weights.
    ``A[j, i]``: integral from 0 to root ``j`` of the degree ``d-1`` Lagrange
    basis ``i`` built on the roots alone.
    """

    degree: int
    tau: np.ndarray
    C: np.ndarray
    D: np.ndarray
    B: np.ndarray
    A: np.ndarray = field(repr=False)

    def basis(self, t: float) -> np.ndarray:
        """Values of the ``d+1`` Lagrange basis polynomials (start + roots) at ``t``."""
        return _lagrange_values(self.tau, t)

    def stage_basis(self, t: float) -> np.ndarray:
        """Values of the ``d`` Lagrange basis polynomials on the roots alone."""
        return _lagrange_values(self.tau[1:], t)


def _lagrange_values(nodes: np.ndarray, t: float) -> np.ndarray:
    out = np.ones(len(nodes))
    for r in range(len(nodes)):
        for k in range(len(nodes)):
            if k != r:
                out[r] *= (t - nodes[k]) / (nodes[r] - nodes[k])
    return out


def _barycentric_derivatives(nodes: np.ndarray) -> np.ndarray:
    """``M[i, j] = L_j'(nodes[i])`` via barycentric weights (stable for d <= 10)."""
    n = len(nodes)
    w = np.array([1.0 / np.prod([nodes[i] - nodes[k] for k in range(n) if k != i]) for i in range(n)])
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                M[i, j] = (w[j] / w[i]) / (nodes[i] - nodes[j])
        M[i, i] = -M[i].sum()
    return M


@lru_cache(maxsize=None)
def gauss_legendre(degree: int) -> GaussLegendre:
    if not 1 <= degree <= MAX_DEGREE:
        raise SchemeError(f"unsupported degree {degree}; supported 1..{MAX_DEGREE}")
    roots, weights = npleg.leggauss(degree)
    tau = np.concatenate([[0.0], 0.5 * (roots + 1.0)])
    d = degree
    C = _barycentric_derivatives(tau)[1:, :].T.copy()
    D = _lagrange_values(tau, 1.0)
    # integrals of the root-only basis from 0 to each root, by Gauss quadrature
    A = np.zeros((d, d))
    for j in range(d):
        xq = 0.5 * tau[j + 1] * (roots + 1.0)
        wq = 0.5 * tau[j + 1] * weights
        A[j, :] = sum(wq[q] * _lagrange_values(tau[1:], xq[q]) for q in range(d))
    return GaussLegendre(d, tau, C, D, 0.5 * weights, A)


def collocate_element(dynamics_fn, x0, stage_states, duration, scheme: CollocationScheme):
    """Collocation defects and extrapolated end state for one element.

    ``dynamics_fn(j, x_j)`` returns the derivative at stage ``j`` (0-based).
    Returns ``(defects, x_end)`` where ``defects[j] = sum_r C[r, j] x_r -
    duration * f_j``; the caller equates ``x_end`` with the next element.
    """
    if not scheme.is_collocation:
        raise SchemeError("collocate_element requires a Gauss-Legendre scheme")
    co = scheme.coefficients
    if len(stage_states) != co.degree:
        raise SchemeError(f"expected {co.degree} stage states, got {len(stage_states)}")
    points = [x0] + list(stage_states)
    defects = []
    for j in range(co.degree):
        slope = sum(co.C[r, j] * points[r] for r in range(co.degree + 1))
        defects.append(slope - duration * dynamics_fn(j, points[j + 1]))
    x_end = sum(co.D[r] * points[r] for r in range(co.degree + 1))
    return defects, x_end


def shoot_element_rk4(dynamics_fn, start_state, inputs, duration, substeps: int = 1):
    """Classical RK4 over ``duration`` with ``substeps`` equal steps.

    ``dynamics_fn(x, u)`` is evaluated with the element's constant input.
    """
    if substeps < 1:
        raise SchemeError("substeps must be >= 1")
    h = duration / substeps
    x = start_state
    for _ in range(substeps):
        k1 = dynamics_fn(x, inputs)
        k2 = dynamics_fn(x + 0.5 * h * k1, inputs)
        k3 = dynamics_fn(x + 0.5 * h * k2, inputs)
        k4 = dynamics_fn(x + h * k3, inputs)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x
