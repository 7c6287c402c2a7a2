"""l1-penalized least squares by cyclic coordinate descent.

Objective (kept verbatim, no silent rescaling of lambda):

    (1/n') |Y - X beta|_2^2 + lambda * sum_j w_j |beta_j|

with optional positive per-coordinate weights w_j (adaptive mode,
w_j = 1 / |pilot_j|^delta; pilot_j = 0 pins coordinate j to zero).
lambda = 0 falls back to least squares via numpy lstsq.

KKT optimality, with grad_j = (2/n') X_j^T (X beta - Y):
    beta_j != 0:  grad_j + lambda w_j sign(beta_j) = 0
    beta_j  = 0:  |grad_j| <= lambda w_j
kkt_residual reports the largest violation of these conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateInputError

__all__ = [
    "LassoProblem",
    "LassoSolution",
    "soft_threshold",
    "lambda_max",
    "fit",
    "fit_adaptive",
    "kkt_residual",
    "lambda_path",
]


@dataclass(frozen=True)
class LassoProblem:
    """Design, response, penalty level and optional adaptive weights."""

    design: np.ndarray
    response: np.ndarray
    lam: float = 0.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ArgumentError("design must be a nonempty 2D matrix")
        if y.shape != (x.shape[0],):
            raise ArgumentError("response length must match design rows")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise ArgumentError("design and response must be finite")
        if not self.lam >= 0:
            raise ArgumentError("lambda must be nonnegative")
        w = self.weights
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.shape != (x.shape[1],):
                raise ArgumentError("weights length must match design columns")
            # infinite weights encode pinned coordinates; NaN and <=0 are bad
            if np.isnan(w).any() or (w <= 0).any():
                raise ArgumentError("weights must be positive")
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.p)
        return self.weights

    def objective(self, beta: np.ndarray) -> float:
        r = self.response - self.design @ beta
        pen = 0.0
        if self.lam > 0:
            w = self.weight_vector()
            live = beta != 0
            pen = self.lam * float(np.sum(w[live] * np.abs(beta[live])))
        return float(r @ r) / self.n + pen


@dataclass(frozen=True)
class LassoSolution:
    beta: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    lam: float = 0.0


def soft_threshold(x: float, t: float) -> float:
    """sign(x) * max(|x| - t, 0)."""
    if t < 0:
        raise ArgumentError("threshold must be nonnegative")
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lambda_max(problem: LassoProblem) -> float:
    """Smallest lambda at which the all-zero vector is optimal."""
    corr = (2.0 / problem.n) * (problem.design.T @ problem.response)
    w = problem.weight_vector()
    with np.errstate(invalid="ignore"):
        vals = np.abs(corr) / w
    vals[np.isinf(w)] = 0.0  # pinned coordinates never enter
    return float(np.max(vals)) if vals.size else 0.0


def kkt_residual(problem: LassoProblem, beta: np.ndarray) -> float:
    """Largest violation of the subgradient optimality conditions."""
    beta = np.asarray(beta, dtype=float)
    x, y = problem.design, problem.response
    grad = (2.0 / problem.n) * (x.T @ (x @ beta - y))
    w = problem.weight_vector()
    worst = 0.0
    for j in range(problem.p):
        if np.isinf(w[j]):
            viol = abs(beta[j])  # pinned: any nonzero value is a violation
        elif beta[j] != 0.0:
            viol = abs(grad[j] + problem.lam * w[j] * np.sign(beta[j]))
        else:
            viol = max(0.0, abs(grad[j]) - problem.lam * w[j])
        worst = max(worst, viol)
    return worst


def _kkt_from_q(q, beta, thresh, active) -> float:
    # q = xy - gram @ beta = -gradient; thresh = lam * w on active coords
    worst = 0.0
    for j in np.nonzero(active)[0]:
        t = thresh[j]
        if beta[j] != 0.0:
            worst = max(worst, abs(-q[j] + t * np.sign(beta[j])))
        else:
            worst = max(worst, max(0.0, abs(q[j]) - t))
    return worst


def _lstsq_fit(problem: LassoProblem, active: np.ndarray) -> np.ndarray:
    beta = np.zeros(problem.p)
    if active.any():
        sol, *_ = np.linalg.lstsq(
            problem.design[:, active], problem.response, rcond=None
        )
        beta[active] = sol
    return beta


def fit(
    problem: LassoProblem,
    tolerance: float = 1e-8,
    max_iters: int = 100_000,
    warm_start: np.ndarray | None = None,
) -> LassoSolution:
    """Solve the penalized problem; converged means small coordinate
    updates and a verified KKT residual (<= 10 * tolerance)."""
    p = problem.p
    w = problem.weight_vector()
    active = ~np.isinf(w)

    if problem.lam == 0.0:
        beta = _lstsq_fit(problem, active)
        kkt = kkt_residual(problem, beta)
        return LassoSolution(
            beta=beta, objective=problem.objective(beta), kkt_residual=kkt,
            iterations=0, converged=kkt <= 10 * tolerance, lam=0.0,
        )

    x, y = problem.design, problem.response
    gram = (2.0 / problem.n) * (x.T @ x)
    xy = (2.0 / problem.n) * (x.T @ y)
    diag = np.diag(gram).copy()
    thresh = np.where(active, problem.lam * w, np.inf)

    if warm_start is not None:
        beta = np.asarray(warm_start, dtype=float).copy()
        if beta.shape != (p,):
            raise ArgumentError("warm_start length must match design columns")
        beta[~active] = 0.0
        beta[diag == 0.0] = 0.0  # zero column: penalty alone decides
    else:
        beta = np.zeros(p)
    q = xy - gram @ beta

    order = [j for j in range(p) if active[j] and diag[j] > 0]
    sweeps = 0
    converged = False
    while sweeps < max_iters:
        sweeps += 1
        delta_max = 0.0
        for j in order:
            bj = beta[j]
            new = soft_threshold(q[j] + diag[j] * bj, thresh[j]) / diag[j]
            if new != bj:
                step = new - bj
                beta[j] = new
                q -= gram[:, j] * step
                delta_max = max(delta_max, abs(step))
        if delta_max < tolerance:
            q = xy - gram @ beta  # refresh: q drifts over many sweeps
            if _kkt_from_q(q, beta, thresh, active) <= 10 * tolerance:
                converged = True
                break

    kkt = kkt_residual(problem, beta)
    return LassoSolution(
        beta=beta, objective=problem.objective(beta), kkt_residual=kkt,
        iterations=sweeps, converged=converged and kkt <= 10 * tolerance,
        lam=problem.lam,
    )


def fit_adaptive(
    design: np.ndarray,
    response: np.ndarray,
    mu: float,
    delta: float,
    pilot_beta: np.ndarray,
    tolerance: float = 1e-8,
    max_iters: int = 100_000,
) -> LassoSolution:
    """Weighted fit with w_j = 1/|pilot_j|^delta; zero pilots pin to 0."""
    pilot = np.asarray(pilot_beta, dtype=float)
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    if np.all(pilot == 0):
        raise DegenerateInputError("all pilot coefficients are zero")
    with np.errstate(divide="ignore"):
        w = 1.0 / np.abs(pilot) ** delta
    problem = LassoProblem(design, response, lam=mu, weights=w)
    return fit(problem, tolerance=tolerance, max_iters=max_iters)


def lambda_path(
    problem: LassoProblem,
    num: int = 50,
    ratio: float = 1e-3,
    tolerance: float = 1e-8,
    max_iters: int = 100_000,
) -> list[LassoSolution]:
    """Warm-started solutions on a log-spaced grid from lambda_max down to
    lambda_max * ratio.  Degenerate lambda_max = 0 gives the single
    unpenalized solution."""
    lam_hi = lambda_max(problem)
    if lam_hi == 0.0:
        flat = LassoProblem(problem.design, problem.response, 0.0, problem.weights)
        return [fit(flat, tolerance, max_iters)]
    lams = np.geomspace(lam_hi, lam_hi * ratio, num=num)
    out = []
    beta = None
    for lam in lams:
        sub = LassoProblem(problem.design, problem.response, float(lam),
                           problem.weights)
        sol = fit(sub, tolerance, max_iters, warm_start=beta)
        out.append(sol)
        beta = sol.beta
    return out
