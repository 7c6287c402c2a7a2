"""Two-step estimation end to end.

Step 1: estimate conditional Kendall's tau at the design points z'_i by
kernel weighting.  Step 2: regress Y_i = Lambda(tau_hat(z'_i)) on the
dictionary features psi(z'_i) with an l1 penalty.  Prediction inverts the
transform: tau(z) = Lambda^{-1}(psi(z)^T beta_hat).

The second stage standardizes by default: dictionary columns are
centered and rescaled to unit sd, the response is centered, and the
coefficients are mapped back to the original basis with both offsets
folded into the constant term.  Without column scaling, near-collinear
smooth atoms compete on raw column norms and the selected support
becomes an artifact of the atom scaling.  Response centering makes the
constant term effectively unpenalized (its coefficient in the centered
problem is exactly zero by orthogonality), the usual intercept
convention; a pure level like a constant tau is then reproduced instead
of shrunk toward zero.  Centering is only applied when the dictionary
contains a constant term to absorb the offsets; standardize=False keeps
the literal all-coefficients-penalized objective on raw columns.

Cross-validation for lambda (N contiguous blocks after a seeded
shuffle): for each fold, the first-stage estimate is recomputed on the
held-out block D_k while beta is fitted on the complement, and the score
is sum_i (tau_hat^{(k)}_i - prediction_i)^2.  By default predictions are
compared on the tau scale through the unclipped inverse transform, which
reduces to the raw linear predictor for the identity transform;
cv_scale="transformed" scores the linear predictor against
Lambda(tau_hat) instead.  cv_swap_roles exchanges the two roles.  The
fitted lambda is cv_multiplier times the cross-validated minimizer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .concordance import CktEstimate, ckt_batch, pair_matrix, variant
from .dictionary import Dictionary, design_matrix, evaluate, evaluate_derivative
from .dictionary import from_descriptor, to_descriptor
from .errors import (
    ArgumentError,
    EstimationImpossibleError,
    NumericalError,
)
from .kernels import KernelSpec, Sample
from .lasso import LassoProblem, LassoSolution, fit as lasso_fit, lambda_max
from .transforms import TransformSpec, apply as t_apply, derivative as t_deriv
from .transforms import inverse as t_inverse

__all__ = [
    "FitConfig",
    "FitResult",
    "CvResult",
    "two_step_fit",
    "predict",
    "marginal_effect",
    "cross_validate_lambda",
    "to_json_dict",
    "from_json_dict",
]

JSON_SCHEMA = "ckreg.fit_result/1"


@dataclass(frozen=True)
class FitConfig:
    """Everything the two-step fit needs besides the data."""

    kernel: KernelSpec
    dictionary: Dictionary
    design_points: np.ndarray
    transform: TransformSpec = TransformSpec()
    lam: float | str = "cv"  # nonnegative value, or "cv"
    variant: str = "g2"
    include_diagonal: bool = True
    standardize: bool = True
    cv_folds: int = 5
    cv_lambda_grid: tuple | None = None
    cv_multiplier: float = 2.0
    cv_scale: str = "tau"  # tau | transformed
    cv_swap_roles: bool = False
    seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.design_points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ArgumentError("design_points must be a nonempty point list")
        if pts.shape[1] != self.dictionary.input_dim:
            raise ArgumentError("design_points dimension does not match dictionary")
        if pts.shape[1] != self.kernel.dim:
            raise ArgumentError("design_points dimension does not match kernel")
        if self.dictionary.input_box is not None:
            lo, hi = self.dictionary.input_box
            if np.any(pts < np.asarray(lo)) or np.any(pts > np.asarray(hi)):
                raise ArgumentError("design_points outside the dictionary box")
        if isinstance(self.lam, str):
            if self.lam != "cv":
                raise ArgumentError("lam must be a nonnegative number or 'cv'")
        elif not self.lam >= 0:
            raise ArgumentError("lam must be a nonnegative number or 'cv'")
        if self.cv_folds < 2:
            raise ArgumentError("cv_folds must be >= 2")
        if self.cv_scale not in ("tau", "transformed"):
            raise ArgumentError("cv_scale must be 'tau' or 'transformed'")
        variant(self.variant)  # validates
        pts.setflags(write=False)
        object.__setattr__(self, "design_points", pts)

    @property
    def n_points(self) -> int:
        return self.design_points.shape[0]


@dataclass(frozen=True)
class CvResult:
    lambda_cv: float
    lambda_grid: np.ndarray
    errors: np.ndarray  # summed over folds, per grid value
    skipped_folds: int


@dataclass(frozen=True)
class FitResult:
    # beta is always in the dictionary basis; with standardize=True the
    # attached solution describes the rescaled problem actually solved.
    beta: np.ndarray
    lambda_used: float
    first_stage: list[CktEstimate]
    excluded_points: int
    config: FitConfig
    solution: LassoSolution
    runtime: dict = field(default_factory=dict)
    cv: CvResult | None = None

    @property
    def converged(self) -> bool:
        return self.solution.converged


def _scaling(x: np.ndarray, dictionary: Dictionary):
    """Per-column shift and scale for the second-stage design.  Constant
    columns are left untouched; centering is dropped entirely when the
    dictionary has no constant term to absorb the offset."""
    shift = x.mean(axis=0)
    scale = x.std(axis=0)
    fixed = scale <= 1e-12
    if dictionary.constant_index is None:
        shift = np.zeros_like(shift)
    shift[fixed] = 0.0
    scale[fixed] = 1.0
    return shift, scale


def _y_shift(y: np.ndarray, dictionary: Dictionary) -> float:
    """Response centering: with a constant term present the response mean
    is absorbed by the intercept instead of being penalized (the centered
    columns are orthogonal to the constant, so its penalized coefficient
    solves to exactly zero and the mean is restored afterwards)."""
    return float(y.mean()) if dictionary.constant_index is not None else 0.0


def _unscale(beta_scaled, shift, scale, dictionary: Dictionary,
             y_shift: float = 0.0):
    """Map coefficients of the standardized problem back to the original
    basis; the centering offsets land on the constant term (whose column
    value is its coefficient, not necessarily 1)."""
    beta = beta_scaled / scale
    ci = dictionary.constant_index
    if ci is not None:
        offset = float(shift @ beta)
        beta[ci] += (y_shift - offset) / dictionary.terms[ci].coefficient
    return beta


def _first_stage(sample, config, points, pair):
    ests = ckt_batch(
        sample, points, config.kernel, config.variant,
        config.include_diagonal, pair=pair,
    )
    valid = np.array([e.valid for e in ests])
    tau = np.array([e.value for e in ests])
    return ests, valid, tau


def two_step_fit(sample: Sample, config: FitConfig) -> FitResult:
    """Run both stages; design points whose first stage failed are dropped
    from the regression and counted, never silently imputed."""
    t0 = time.perf_counter()
    pair = pair_matrix(sample, variant(config.variant))
    pts = config.design_points
    ests, valid, tau = _first_stage(sample, config, pts, pair)
    excluded = int((~valid).sum())
    if not valid.any():
        raise EstimationImpossibleError(
            "first stage failed at every design point (empty neighborhoods)"
        )
    t1 = time.perf_counter()

    cv = None
    if isinstance(config.lam, str):  # "cv"
        cv = cross_validate_lambda(sample, config, pair=pair)
        lam = cv.lambda_cv * config.cv_multiplier
    else:
        lam = float(config.lam)
    t2 = time.perf_counter()

    x = design_matrix(config.dictionary, pts[valid])
    y = t_apply(config.transform, tau[valid])
    if config.standardize:
        shift, scale = _scaling(x, config.dictionary)
        ybar = _y_shift(y, config.dictionary)
        solution = lasso_fit(LassoProblem((x - shift) / scale, y - ybar, lam))
        beta = _unscale(solution.beta, shift, scale, config.dictionary, ybar)
    else:
        solution = lasso_fit(LassoProblem(x, y, lam))
        beta = solution.beta
    t3 = time.perf_counter()

    return FitResult(
        beta=beta,
        lambda_used=lam,
        first_stage=ests,
        excluded_points=excluded,
        config=config,
        solution=solution,
        runtime={
            "first_stage_s": t1 - t0,
            "cv_s": t2 - t1,
            "second_stage_s": t3 - t2,
            "total_s": t3 - t0,
        },
        cv=cv,
    )


def predict(fit: FitResult, z) -> float | np.ndarray:
    """Lambda^{-1}(psi(z)^T beta), clipped to [-1, 1]; accepts one point
    or a batch."""
    d = fit.config.dictionary
    pts = np.asarray(z, dtype=float)
    scalar = pts.ndim == 0 or (pts.ndim == 1 and pts.shape[0] == d.input_dim)
    if pts.ndim == 0:
        pts = pts[None, None]
    elif pts.ndim == 1:
        pts = pts[None, :] if scalar else pts[:, None]
    x = design_matrix(d, pts)
    nz = np.nonzero(fit.beta)[0]  # sparse dot: only active coefficients
    pred = x[:, nz] @ fit.beta[nz]
    out = t_inverse(fit.config.transform, pred)
    return float(out[0]) if scalar else out


def marginal_effect(fit: FitResult, z, coord: int = 1) -> float:
    """d tau / d z_coord at z by the chain rule:
    (d_coord psi(z)^T beta) / Lambda'(Lambda^{-1}(psi(z)^T beta))."""
    d = fit.config.dictionary
    q = np.atleast_1d(np.asarray(z, dtype=float))
    pred = float(evaluate(d, q) @ fit.beta)
    tau = t_inverse(fit.config.transform, pred, clip=False)
    if not -1.0 < tau < 1.0:
        raise NumericalError(
            f"predictor saturates the transform at z={q.tolist()} "
            f"(tau = {tau:g}); the derivative is undefined there"
        )
    grad = float(evaluate_derivative(d, q, coord) @ fit.beta)
    return grad / t_deriv(fit.config.transform, tau)


def _fold_blocks(n: int, folds: int, seed: int) -> list[np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(order, folds)]


def _default_grid(x, y, config, num=50, ratio=1e-3):
    if config.standardize:
        shift, scale = _scaling(x, config.dictionary)
        x = (x - shift) / scale
        y = y - _y_shift(y, config.dictionary)
    hi = lambda_max(LassoProblem(x, y))
    if hi == 0.0:
        return np.array([0.0])
    return np.geomspace(hi, hi * ratio, num=num)


def cross_validate_lambda(
    sample: Sample, config: FitConfig, pair: np.ndarray | None = None
) -> CvResult:
    """Block cross-validation for the penalty level (see module docstring
    for the exact roles of the blocks)."""
    if pair is None:
        pair = pair_matrix(sample, variant(config.variant))
    pts = config.design_points
    blocks = _fold_blocks(sample.n, config.cv_folds, config.seed)

    if config.cv_lambda_grid is not None:
        grid = np.asarray(config.cv_lambda_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1 or np.any(grid < 0):
            raise ArgumentError("cv_lambda_grid must be nonnegative values")
        grid = np.sort(grid)[::-1]
    else:
        _, valid_full, tau_full = _first_stage(sample, config, pts, pair)
        if not valid_full.any():
            raise EstimationImpossibleError(
                "first stage failed at every design point (empty neighborhoods)"
            )
        x_full = design_matrix(config.dictionary, pts[valid_full])
        y_full = t_apply(config.transform, tau_full[valid_full])
        grid = _default_grid(x_full, y_full, config)

    errors = np.zeros(grid.size)
    skipped = 0
    all_idx = np.arange(sample.n)
    for block in blocks:
        mask = np.zeros(sample.n, dtype=bool)
        mask[block] = True
        eval_idx, fit_idx = block, all_idx[~mask]
        if config.cv_swap_roles:
            eval_idx, fit_idx = fit_idx, eval_idx

        sub_eval = sample.restrict(eval_idx)
        sub_fit = sample.restrict(fit_idx)
        _, v_eval, tau_eval = _first_stage(
            sub_eval, config, pts, pair[np.ix_(eval_idx, eval_idx)]
        )
        _, v_fit, tau_fit = _first_stage(
            sub_fit, config, pts, pair[np.ix_(fit_idx, fit_idx)]
        )
        if not v_eval.any() or not v_fit.any():
            skipped += 1
            continue

        x_fit = design_matrix(config.dictionary, pts[v_fit])
        y_fit = t_apply(config.transform, tau_fit[v_fit])
        x_eval = design_matrix(config.dictionary, pts[v_eval])
        if config.standardize:
            shift, scale = _scaling(x_fit, config.dictionary)
            ybar = _y_shift(y_fit, config.dictionary)
            x_fit = (x_fit - shift) / scale
            y_fit = y_fit - ybar

        beta = None
        for g, lam in enumerate(grid):
            # fold fits only rank lambdas: approximate solves suffice and
            # cap the cost of the ill-conditioned small-lambda tail
            sol = lasso_fit(LassoProblem(x_fit, y_fit, float(lam)),
                            tolerance=1e-6, max_iters=1000, warm_start=beta)
            beta = sol.beta
            if config.standardize:
                pred = x_eval @ _unscale(beta, shift, scale,
                                         config.dictionary, ybar)
            else:
                pred = x_eval @ beta
            if config.cv_scale == "tau":
                resid = tau_eval[v_eval] - t_inverse(
                    config.transform, pred, clip=False
                )
            else:
                resid = t_apply(config.transform, tau_eval[v_eval]) - pred
            errors[g] += float(resid @ resid)

    if skipped == len(blocks):
        raise EstimationImpossibleError(
            "every cross-validation fold lacked valid design points"
        )
    best = int(np.argmin(errors))  # ties resolve to the largest lambda
    return CvResult(
        lambda_cv=float(grid[best]), lambda_grid=grid, errors=errors,
        skipped_folds=skipped,
    )


def to_json_dict(fit: FitResult) -> dict:
    """JSON-ready view of a fit; field names are a stable contract."""
    cfg = fit.config
    return {
        "schema": JSON_SCHEMA,
        "beta": fit.beta.tolist(),
        "lambda": fit.lambda_used,
        "dictionary": to_descriptor(cfg.dictionary),
        "transform": {
            "family": cfg.transform.family,
            "clamp_eps": cfg.transform.clamp_eps,
        },
        "kernel": {
            "family": cfg.kernel.family,
            "bandwidth": cfg.kernel.bandwidth,
            "dim": cfg.kernel.dim,
        },
        "design_points": cfg.design_points.tolist(),
        "config": {
            "variant": variant(cfg.variant).id,
            "include_diagonal": cfg.include_diagonal,
            "standardize": cfg.standardize,
            "lambda_requested": cfg.lam if isinstance(cfg.lam, str) else float(cfg.lam),
            "cv_folds": cfg.cv_folds,
            "cv_multiplier": cfg.cv_multiplier,
            "cv_scale": cfg.cv_scale,
            "cv_swap_roles": cfg.cv_swap_roles,
            "seed": cfg.seed,
        },
        "first_stage": {
            "tau": [float(e.value) for e in fit.first_stage],
            "raw": [float(e.raw_value) for e in fit.first_stage],
            "f_hat": [float(e.f_hat) for e in fit.first_stage],
            "support": [int(e.support_count) for e in fit.first_stage],
            "valid": [bool(e.valid) for e in fit.first_stage],
        },
        "diagnostics": {
            "excluded_points": int(fit.excluded_points),
            "clipped_points": int(sum(bool(e.clipped) for e in fit.first_stage)),
            "converged": bool(fit.solution.converged),
            "kkt_residual": float(fit.solution.kkt_residual),
            "iterations": int(fit.solution.iterations),
            "cv_lambda": None if fit.cv is None else fit.cv.lambda_cv,
            "cv_skipped_folds": 0 if fit.cv is None else fit.cv.skipped_folds,
        },
        "timing": dict(fit.runtime),
    }


def from_json_dict(doc: dict) -> FitResult:
    """Rebuild a FitResult (sufficient for predict / marginal_effect)
    from to_json_dict output."""
    if doc.get("schema") != JSON_SCHEMA:
        raise ArgumentError("unknown fit-result schema")
    cfg_doc = doc.get("config", {})
    config = FitConfig(
        kernel=KernelSpec(**doc["kernel"]),
        dictionary=from_descriptor(doc["dictionary"]),
        design_points=np.asarray(doc["design_points"], dtype=float),
        transform=TransformSpec(**doc["transform"]),
        lam=cfg_doc.get("lambda_requested", doc["lambda"]),
        variant=cfg_doc.get("variant", "g2"),
        include_diagonal=cfg_doc.get("include_diagonal", True),
        standardize=cfg_doc.get("standardize", True),
        cv_folds=cfg_doc.get("cv_folds", 5),
        cv_multiplier=cfg_doc.get("cv_multiplier", 2.0),
        cv_scale=cfg_doc.get("cv_scale", "tau"),
        cv_swap_roles=cfg_doc.get("cv_swap_roles", False),
        seed=cfg_doc.get("seed", 0),
    )
    fs = doc.get("first_stage", {})
    pts = config.design_points
    ests = [
        CktEstimate(
            value=v, raw_value=r, z=tuple(pts[i]), f_hat=f,
            support_count=int(s), clipped=v != r, valid=bool(ok),
        )
        for i, (v, r, f, s, ok) in enumerate(
            zip(fs.get("tau", []), fs.get("raw", []), fs.get("f_hat", []),
                fs.get("support", []), fs.get("valid", []))
        )
    ]
    diag = doc.get("diagnostics", {})
    beta = np.asarray(doc["beta"], dtype=float)
    solution = LassoSolution(
        beta=beta,
        objective=float("nan"),
        kkt_residual=diag.get("kkt_residual", float("nan")),
        iterations=diag.get("iterations", 0),
        converged=diag.get("converged", True),
        lam=doc["lambda"],
    )
    return FitResult(
        beta=beta, lambda_used=float(doc["lambda"]), first_stage=ests,
        excluded_points=diag.get("excluded_points", 0), config=config,
        solution=solution, runtime=doc.get("timing", {}),
    )
