"""Container for a transcribed nonlinear program."""

from __future__ import annotations

from dataclasses import dataclass, field

import casadi as ca
import numpy as np


@dataclass
class NlpProblem:
    """``min f(x)  s.t.  lbg <= g(x) <= ubg,  lbx <= x <= ubx``.

    ``index`` maps variable block names to integer positions in ``x``;
    ``tags`` labels every constraint row by the family it belongs to.
    """

    x: ca.SX
    f: ca.SX
    g: ca.SX
    lbx: np.ndarray
    ubx: np.ndarray
    x0: np.ndarray
    lbg: np.ndarray
    ubg: np.ndarray
    index: dict
    tags: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_var(self) -> int:
        return int(self.x.numel())

    @property
    def n_con(self) -> int:
        return int(self.g.numel())

    def tag_counts(self) -> dict:
        out: dict = {}
        for t in self.tags:
            out[t] = out.get(t, 0) + 1
        return out

    def jacobian_sparsity(self) -> ca.Sparsity:
        return ca.jacobian(self.g, self.x).sparsity()

    def evaluator(self) -> ca.Function:
        fn = self.metadata.get("_evaluator")
        if fn is None:
            fn = ca.Function("nlp_eval", [self.x], [self.f, self.g])
            self.metadata["_evaluator"] = fn
        return fn

    def evaluate(self, xv) -> tuple:
        f, g = self.evaluator()(np.asarray(xv, dtype=float))
        return float(f), np.asarray(g.full()).reshape(-1)

    def constraint_violation(self, xv, tags=None) -> float:
        """Largest bound or constraint violation at ``xv``, optionally restricted to tag families."""
        xv = np.asarray(xv, dtype=float)
        _, g = self.evaluate(xv)
        viol = np.maximum(self.lbg - g, 0.0) + np.maximum(g - self.ubg, 0.0)
        if tags is not None:
            mask = np.array([t in tags for t in self.tags], dtype=bool)
            viol = viol[mask]
        worst = float(np.max(viol)) if viol.size else 0.0
        if tags is None:
            xb = np.maximum(self.lbx - xv, 0.0) + np.maximum(xv - self.ubx, 0.0)
            worst = max(worst, float(np.max(xb)) if xb.size else 0.0)
        return worst

    def values(self, xv, name: str) -> np.ndarray:
        return np.asarray(xv, dtype=float)[self.index[name]]


class NlpBuilder:
    """Accumulates variables and constraints in declaration order."""

    def __init__(self):
        self._vars: list = []
        self._lbx: list = []
        self._ubx: list = []
        self._x0: list = []
        self._g: list = []
        self._lbg: list = []
        self._ubg: list = []
        self._tags: list = []
        self._index: dict = {}
        self._block: dict = {}
        self._n = 0

    def variable(self, name: str, n: int, lb=-np.inf, ub=np.inf, init=0.0) -> ca.SX:
        if name in self._index:
            raise KeyError(f"duplicate variable block {name!r}")
        v = ca.SX.sym(name, n)
        self._block[name] = len(self._vars)
        self._vars.append(v)
        self._lbx.append(np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy())
        self._ubx.append(np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy())
        self._x0.append(np.broadcast_to(np.asarray(init, dtype=float), (n,)).copy())
        self._index[name] = np.arange(self._n, self._n + n)
        self._n += n
        return v

    def set_initial(self, name: str, values) -> None:
        k = self._block[name]
        self._x0[k] = np.asarray(values, dtype=float).reshape(self._x0[k].shape)

    def constrain(self, expr, lb, ub, tag: str) -> None:
        expr = ca.vec(ca.SX(expr))
        n = expr.numel()
        self._g.append(expr)
        self._lbg.append(np.broadcast_to(np.asarray(lb, dtype=float), (n,)))
        self._ubg.append(np.broadcast_to(np.asarray(ub, dtype=float), (n,)))
        self._tags.extend([tag] * n)

    def equal(self, expr, tag: str, value=0.0) -> None:
        self.constrain(expr, value, value, tag)

    def build(self, objective, metadata=None) -> NlpProblem:
        x = ca.vertcat(*self._vars)
        g = ca.vertcat(*self._g) if self._g else ca.SX(0, 1)

        def cat(parts):
            return np.concatenate(parts).astype(float) if parts else np.zeros(0)

        return NlpProblem(
            x=x,
            f=ca.SX(objective),
            g=g,
            lbx=cat(self._lbx),
            ubx=cat(self._ubx),
            x0=cat(self._x0),
            lbg=cat(self._lbg),
            ubg=cat(self._ubg),
            index=dict(self._index),
            tags=list(self._tags),
            metadata=dict(metadata or {}),
        )
