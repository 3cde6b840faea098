"""Smoothed lp machinery and the iterative reweighted-l2 MM loop.

The smoothed objective f_p(z; eps) = sum_i rho_i (z_i^2 + eps^2)^(p/2)
is minimized by repeatedly solving weighted-l2 subproblems: the quadratic
majorizer Q(z; w) = sum_i w_i z_i^2 is tight at the current iterate and
its minimizer never increases f_p. The loop is generic over a subproblem
builder so the same driver serves group-sparse RRH selection and
individual-sparse admission slacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import ConicSolution, SolverSettings, solve


@dataclass(frozen=True)
class SmoothingParams:
    """Parameters of the smoothed lp objective and the reweighting loop."""

    p: float = 1.0
    epsilon: float = 1e-3
    max_iters: int = 30
    obj_tol: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.obj_tol <= 0.0:
            raise ValueError("obj_tol must be positive")


@dataclass
class IterTrace:
    """Per-iteration record of one reweighted-l2 run.

    status is Converged | MaxIterations | Infeasible | SolverStalled;
    SolverStalled marks a subproblem that hit the conic solver's own
    iteration cap, which is reported distinctly and never conflated
    with infeasibility.
    """

    objectives: list[float] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)
    magnitudes: list[np.ndarray] = field(default_factory=list)
    subproblem_statuses: list[str] = field(default_factory=list)
    solver_iterations: list[int] = field(default_factory=list)
    status: str = "MaxIterations"

    def __len__(self):
        return len(self.objectives)


def _as_rho(rho, m: int) -> np.ndarray:
    if rho is None:
        return np.ones(m)
    r = np.asarray(rho, dtype=float)
    if r.shape != (m,):
        raise ValueError("rho must have one entry per component of z")
    if np.any(r <= 0.0):
        raise ValueError("rho entries must be positive")
    return r


def smoothed_lp_from_squares(z_sq, params: SmoothingParams, rho=None) -> float:
    z_sq = np.clip(np.asarray(z_sq, dtype=float), 0.0, None)
    r = _as_rho(rho, z_sq.size)
    return float(np.sum(r * (z_sq + params.epsilon ** 2) ** (params.p / 2.0)))


def smoothed_lp_value(z, params: SmoothingParams, rho=None) -> float:
    """f_p(z; eps) = sum_i rho_i (z_i^2 + eps^2)^(p/2)."""
    z = np.asarray(z, dtype=float)
    return smoothed_lp_from_squares(z * z, params, rho)


def majorizer_value(z, omega) -> float:
    """Quadratic majorizer value Q(z; omega) = sum_i omega_i z_i^2."""
    z = np.asarray(z, dtype=float)
    return float(np.sum(np.asarray(omega, dtype=float) * z * z))


def update_weights_from_squares(z_sq, params: SmoothingParams,
                                rho=None) -> np.ndarray:
    """Weights from squared magnitudes, avoiding a sqrt round trip."""
    z_sq = np.clip(np.asarray(z_sq, dtype=float), 0.0, None)
    r = _as_rho(rho, z_sq.size)
    w = r * (params.p / 2.0) * (
        z_sq + params.epsilon ** 2) ** (params.p / 2.0 - 1.0)
    # eps > 0 keeps these finite and positive for any z
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise AssertionError("weights must be finite and positive")
    return w


def update_weights(z, params: SmoothingParams, rho=None) -> np.ndarray:
    """omega_i = rho_i (p/2) (z_i^2 + eps^2)^(p/2 - 1)."""
    z = np.asarray(z, dtype=float)
    return update_weights_from_squares(z * z, params, rho)


def reweighted_solve(builder, extract_squares, num_weights: int,
                     params: SmoothingParams, rho=None,
                     solver_settings: SolverSettings | None = None,
                     warm_start: bool = True, omega0=None, solver=solve
                     ) -> tuple[ConicSolution | None, IterTrace]:
    """Iterative reweighted-l2 loop over a generic conic subproblem.

    builder maps a positive weight vector of length num_weights to a
    ConicProblem and extract_squares maps its solution to the squared
    magnitudes z_i^2 (group powers or squared slacks). Starts from
    all-ones weights unless omega0 overrides the initial point, stops
    when consecutive smoothed objectives differ by less than obj_tol,
    and aborts with Infeasible on the first infeasible subproblem.
    Returns the last solution (None if the very first subproblem fails)
    and the full trace.
    """
    trace = IterTrace()
    sol = None
    if omega0 is None:
        omega = np.ones(num_weights)
    else:
        omega = np.asarray(omega0, dtype=float)
        if omega.shape != (num_weights,) or np.any(omega <= 0.0):
            raise ValueError("omega0 must be a positive vector of the "
                             "stated length")
    prev_obj = None
    warm = None
    for _ in range(params.max_iters):
        cur = solver(builder(omega), solver_settings, warm_start=warm)
        if cur.status in ("PrimalInfeasible", "Unbounded"):
            trace.status = "Infeasible"
            trace.subproblem_statuses.append(cur.status)
            return sol, trace
        if cur.status == "MaxIterations":
            trace.status = "SolverStalled"
            trace.subproblem_statuses.append(cur.status)
            return cur, trace
        sol = cur
        if warm_start:
            warm = (cur.x, cur.y, cur.s)
        z_sq = np.clip(np.asarray(extract_squares(cur), dtype=float),
                       0.0, None)
        obj = smoothed_lp_from_squares(z_sq, params, rho)
        trace.objectives.append(obj)
        trace.weights.append(omega)
        trace.magnitudes.append(np.sqrt(z_sq))
        trace.subproblem_statuses.append(cur.status)
        trace.solver_iterations.append(cur.iterations)
        if prev_obj is not None and abs(prev_obj - obj) < params.obj_tol:
            trace.status = "Converged"
            return sol, trace
        prev_obj = obj
        omega = update_weights_from_squares(z_sq, params, rho)
    trace.status = "MaxIterations"
    return sol, trace
