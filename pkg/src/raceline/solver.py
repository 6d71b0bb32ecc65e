"""Exact derivatives and interior-point solves for transcribed programs.

Derivatives come from CasADi's algorithmic differentiation; the solve is
IPOPT's primal-dual interior-point method with a filter line search and
the MUMPS sparse symmetric indefinite factorization.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import casadi as ca
import numpy as np

from .transcription.nlp import NlpProblem

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible_detected"
NUMERICAL_FAILURE = "numerical_failure"

_STATUS = {
    "Solve_Succeeded": CONVERGED,
    "Maximum_Iterations_Exceeded": MAX_ITER,
    "Infeasible_Problem_Detected": INFEASIBLE,
}


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Interior-point settings.

    ``tolerance`` bounds the scaled KKT residual at convergence and
    ``constraint_tolerance`` the unscaled constraint violation.  The latter
    is tighter so that equality rows such as the quaternion projection hold
    well below the optimality tolerance.  ``barrier`` is IPOPT's ``mu_strategy``;
    ``regularization_floor`` is the smallest Hessian perturbation tried when
    the KKT matrix has the wrong inertia.
    """

    tolerance: float = 1e-6
    constraint_tolerance: float = 1e-10
    max_iterations: int = 3000
    barrier: str = "monotone"
    mu_init: float = 0.1
    regularization_floor: float = 1e-20
    linear_solver: str = "mumps"
    print_level: int = 0
    extra_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("solver tolerance must be positive")
        if not self.constraint_tolerance > 0:
            raise ValueError("constraint tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def ipopt_options(self) -> dict:
        opts = {
            "tol": self.tolerance,
            "constr_viol_tol": self.constraint_tolerance,
            "acceptable_iter": 0,
            "max_iter": self.max_iterations,
            "mu_strategy": self.barrier,
            "mu_init": self.mu_init,
            "min_hessian_perturbation": self.regularization_floor,
            "linear_solver": self.linear_solver,
            "print_level": self.print_level,
            "sb": "yes",
        }
        opts.update(self.extra_options)
        return opts


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    barrier: float


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    lam_g: np.ndarray
    lam_x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    total_time: float
    feval_time: float
    setup_time: float
    solver_message: str = ""
    log: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def solver_time(self) -> float:
        """Wall time spent outside function evaluations."""
        return max(self.total_time - self.feval_time, 0.0)

    def iteration_log(self) -> str:
        lines = ["iter objective inf_pr inf_du mu"]
        for r in self.log:
            lines.append(
                f"{r.iteration:4d} {r.objective:.10e} {r.primal_infeasibility:.3e} "
                f"{r.dual_infeasibility:.3e} {r.barrier:.3e}"
            )
        return "\n".join(lines) + "\n"


_NONDIFFERENTIABLE = {
    getattr(ca, name): name[3:].lower()
    for name in ("OP_FLOOR", "OP_CEIL", "OP_SIGN", "OP_FMOD", "OP_REMAINDER",
                 "OP_LT", "OP_LE", "OP_EQ", "OP_NE", "OP_NOT", "OP_AND", "OP_OR")
}


def _reject_nondifferentiable(fn: ca.Function) -> None:
    for k in range(fn.n_instructions()):
        op = fn.instruction_id(k)
        if op in _NONDIFFERENTIABLE:
            raise SolverError(f"non-differentiable primitive {_NONDIFFERENTIABLE[op]!r} in program")


def differentiate(program: Union[Callable, ca.Function], at) -> tuple:
    """Value and exact Jacobian of ``program`` at ``at``.

    ``program`` is a CasADi function of one vector input or a Python callable
    that maps a symbolic column vector to an expression.  For scalar
    programs the Jacobian is the gradient as a row.
    """
    at = np.atleast_1d(np.asarray(at, dtype=float)).reshape(-1)
    if isinstance(program, ca.Function):
        fn = program
        x = ca.SX.sym("x", fn.size1_in(0))
        expr = fn(x)
    else:
        x = ca.SX.sym("x", at.size)
        try:
            expr = program(x)
        except (TypeError, NotImplementedError) as exc:
            raise SolverError(f"program uses an operation the derivative engine cannot trace: {exc}") from exc
        if isinstance(expr, (list, tuple)):
            expr = ca.vertcat(*expr)
        if not isinstance(expr, (ca.SX, ca.MX, ca.DM)):
            raise SolverError(f"program returned {type(expr).__name__}, not a traceable expression")
    expr = ca.SX(expr) if isinstance(expr, ca.DM) else expr
    if isinstance(expr, ca.SX):
        _reject_nondifferentiable(ca.Function("program", [x], [expr]))
    jac = ca.Function("value_and_jacobian", [x], [expr, ca.jacobian(expr, x)])
    value, J = jac(at)
    value = np.asarray(value.full())
    return (value.reshape(-1) if value.size > 1 else float(value.item())), np.asarray(J.full())


def kkt_residual(problem: NlpProblem, x, lam_g, lam_x) -> float:
    """Largest of primal infeasibility and multiplier-scaled dual infeasibility.

    The dual term is scaled as IPOPT does, dividing by
    ``max(1, mean |multiplier| / 100)``.
    """
    grad = ca.Function("grad", [problem.x], [ca.gradient(problem.f, problem.x), ca.jacobian(problem.g, problem.x)])
    gf, J = grad(x)
    lag = np.asarray(gf.full()).reshape(-1) + np.asarray((J.T @ ca.DM(lam_g)).full()).reshape(-1) + lam_x
    m = lam_g.size + lam_x.size
    s_d = max(1.0, (np.abs(lam_g).sum() + np.abs(lam_x).sum()) / max(m, 1) / 100.0)
    return max(problem.constraint_violation(x), float(np.max(np.abs(lag), initial=0.0)) / s_d)


def solve(problem: NlpProblem, config: SolverConfig = SolverConfig(), x0=None) -> SolveResult:
    """Solve ``problem`` from its stored initial point (or ``x0``), clipped into the bounds."""
    start = time.perf_counter()
    x0 = problem.x0 if x0 is None else np.asarray(x0, dtype=float)
    if x0.size != problem.n_var:
        raise SolverError(f"initial point has {x0.size} entries, problem has {problem.n_var} variables")
    x0 = np.clip(x0, problem.lbx, problem.ubx)

    empty = np.where(problem.lbx > problem.ubx)[0]
    empty_g = np.where(problem.lbg > problem.ubg)[0]
    if empty.size or empty_g.size:
        msg = "empty variable bounds" if empty.size else "empty constraint bounds"
        return SolveResult(INFEASIBLE, x0, np.zeros(problem.n_con), np.zeros(problem.n_var), float("nan"),
                           float("inf"), 0, time.perf_counter() - start, 0.0, 0.0, msg)

    setup_start = time.perf_counter()
    nlp = {"x": problem.x, "f": problem.f, "g": problem.g}
    solver = ca.nlpsol("raceline", "ipopt", nlp, {"ipopt": config.ipopt_options(), "print_time": False})
    setup = time.perf_counter() - setup_start + float(problem.metadata.get("build_time", 0.0))

    t0 = time.perf_counter()
    out = solver(x0=x0, lbx=problem.lbx, ubx=problem.ubx, lbg=problem.lbg, ubg=problem.ubg)
    wall = time.perf_counter() - t0
    stats = solver.stats()

    x = np.asarray(out["x"].full()).reshape(-1)
    lam_g = np.asarray(out["lam_g"].full()).reshape(-1)
    lam_x = np.asarray(out["lam_x"].full()).reshape(-1)
    feval = sum(v for k, v in stats.items() if k.startswith("t_wall_nlp_"))
    message = stats.get("return_status", "")
    status = _STATUS.get(message, NUMERICAL_FAILURE)
    it = stats.get("iterations", {})
    records = [
        IterationRecord(i, *vals)
        for i, vals in enumerate(zip(it.get("obj", []), it.get("inf_pr", []), it.get("inf_du", []), it.get("mu", [])))
    ]
    result = SolveResult(
        status=status,
        x=x,
        lam_g=lam_g,
        lam_x=lam_x,
        objective=float(out["f"]),
        kkt_residual=kkt_residual(problem, x, lam_g, lam_x),
        iterations=int(stats.get("iter_count", len(records))),
        total_time=wall,
        feval_time=min(feval, wall),
        setup_time=setup,
        solver_message=message,
        log=records,
    )
    log.info("solve finished: %s after %d iterations, objective %.6g", message, result.iterations, result.objective)
    return result
