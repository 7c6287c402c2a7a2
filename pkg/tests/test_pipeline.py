"""End-to-end two-step fit, prediction, cross-validation, serialization."""

import json

import numpy as np
import pytest

from ckreg.dictionary import (
    Atom,
    Dictionary,
    Term,
    build_family_1d,
    constant_dictionary,
    design_matrix,
    with_input_box,
)
from ckreg.errors import (
    ArgumentError,
    NonDifferentiablePointError,
    NumericalError,
)
from ckreg.kernels import KernelSpec, Sample, rule_of_thumb_bandwidth
from ckreg.lasso import LassoSolution
from ckreg.pipeline import (
    FitConfig,
    FitResult,
    _fold_blocks,
    cross_validate_lambda,
    from_json_dict,
    marginal_effect,
    predict,
    to_json_dict,
    two_step_fit,
)
from ckreg.simulation import get_setting, sample_setting
from ckreg.transforms import TransformSpec


def make_sample(n, seed, setting="s1"):
    return sample_setting(get_setting(setting), n, np.random.default_rng(seed))


def make_config(sample, dictionary=None, points=None, **kw):
    if points is None:
        points = np.linspace(0.05, 0.95, 25)
    if dictionary is None:
        dictionary = build_family_1d()
    h = rule_of_thumb_bandwidth(sample, 0.25)
    return FitConfig(
        kernel=KernelSpec("gaussian", h, 1),
        dictionary=dictionary,
        design_points=points,
        **kw,
    )


def affine_dictionary():
    return Dictionary(
        "affine",
        1,
        (
            Term((Atom("const", 1),), "const"),
            Term((Atom("mono", 1, 1),), "x1"),
        ),
    )


def manual_fit(beta, dictionary, transform=TransformSpec()):
    cfg = FitConfig(
        kernel=KernelSpec("gaussian", 0.1, 1),
        dictionary=dictionary,
        design_points=np.array([0.5]),
        transform=transform,
        lam=0.0,
    )
    beta = np.asarray(beta, dtype=float)
    sol = LassoSolution(
        beta=beta, objective=0.0, kkt_residual=0.0, iterations=0,
        converged=True, lam=0.0,
    )
    return FitResult(
        beta=beta, lambda_used=0.0, first_stage=[], excluded_points=0,
        config=cfg, solution=sol,
    )


def test_fit_is_deterministic():
    sample = make_sample(300, 7)
    cfg = make_config(sample, points=np.linspace(0.1, 0.9, 15), cv_folds=3)
    a = two_step_fit(sample, cfg)
    b = two_step_fit(sample, cfg)
    assert np.array_equal(a.beta, b.beta)
    assert a.lambda_used == b.lambda_used
    assert a.cv.lambda_cv == b.cv.lambda_cv


def test_constant_tau_recovered():
    sample = make_sample(2000, 3, setting="s5")
    cfg = make_config(sample, dictionary=constant_dictionary(), lam=0.0)
    fit = two_step_fit(sample, cfg)
    assert fit.beta.shape == (1,)
    assert abs(fit.beta[0] - 0.5) < 0.05


def test_quadratic_signal_recovered():
    sample = make_sample(2000, 11)
    cfg = make_config(
        sample, points=np.linspace(0.01, 0.99, 50), lam="cv", cv_folds=5,
        seed=11,
    )
    fit = two_step_fit(sample, cfg)
    assert fit.beta[0] > 0.3
    assert fit.beta[2] < -0.15


def test_huge_lambda_gives_exact_zero():
    sample = make_sample(400, 5)

    # literal objective: every coefficient is penalized away
    fit = two_step_fit(sample, make_config(sample, lam=10.0, standardize=False))
    assert np.all(fit.beta == 0.0)

    # standardized fit keeps the unpenalized intercept: the model collapses
    # to the response mean, everything else is exactly zero
    cfg = make_config(sample, lam=10.0, standardize=True)
    fit = two_step_fit(sample, cfg)
    ci = cfg.dictionary.constant_index
    mask = np.arange(fit.beta.size) != ci
    assert np.all(fit.beta[mask] == 0.0)
    valid = np.array([e.valid for e in fit.first_stage])
    tau = np.array([e.value for e in fit.first_stage])
    assert fit.beta[ci] == pytest.approx(tau[valid].mean(), abs=1e-12)


def test_literal_lambda_respected():
    sample = make_sample(300, 2)
    cfg = make_config(sample, lam=0.03)
    fit = two_step_fit(sample, cfg)
    assert fit.lambda_used == 0.03
    assert fit.cv is None


def test_predict_affine_examples():
    fit = manual_fit([0.75, -0.5], affine_dictionary())
    assert predict(fit, 0.5) == pytest.approx(0.5)
    assert predict(fit, 3.0) == pytest.approx(-0.75)
    assert predict(fit, -3.0) == 1.0  # 2.25 clipped
    batch = predict(fit, [0.5, 3.0, -3.0])
    assert np.allclose(batch, [0.5, -0.75, 1.0])


def test_predict_fisher_scale():
    fit = manual_fit([0.0, 1.0], affine_dictionary(), TransformSpec("fisher"))
    assert predict(fit, 1.0) == pytest.approx(np.tanh(0.5), abs=1e-12)
    assert predict(fit, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_marginal_effect_identity():
    fit = manual_fit([0.0, 1.0], affine_dictionary())
    assert marginal_effect(fit, 0.3) == pytest.approx(1.0, abs=1e-12)


def test_marginal_effect_fisher():
    # dtau/dz = psi'(z) beta / Lambda'(tau); at z=0 tau=0, Lambda'(0)=2
    fit = manual_fit([0.0, 1.0], affine_dictionary(), TransformSpec("fisher"))
    assert marginal_effect(fit, 0.0) == pytest.approx(0.5, abs=1e-12)


def test_marginal_effect_matches_finite_difference():
    beta = np.array([0.2, 0.1, -0.3, 0.0, 0.05, 0.0, 0.08, -0.02, 0.0, 0.0,
                     0.04, -0.03])
    fit = manual_fit(beta, build_family_1d(), TransformSpec("fisher"))
    z, step = 0.3, 1e-5
    fd = (predict(fit, z + step) - predict(fit, z - step)) / (2 * step)
    assert marginal_effect(fit, z) == pytest.approx(fd, rel=1e-4)


def test_marginal_effect_indicator_knot_raises():
    fit = manual_fit(np.zeros(12), build_family_1d())
    with pytest.raises(NonDifferentiablePointError):
        marginal_effect(fit, 0.4)


def test_marginal_effect_saturation_raises():
    fit = manual_fit([0.75, -0.5], affine_dictionary())
    with pytest.raises(NumericalError):
        marginal_effect(fit, -3.0)


def test_fold_blocks_partition():
    blocks = _fold_blocks(103, 5, seed=1)
    assert len(blocks) == 5
    sizes = sorted(len(b) for b in blocks)
    assert sizes == [20, 20, 21, 21, 21]
    merged = np.concatenate(blocks)
    assert np.array_equal(np.sort(merged), np.arange(103))
    for b in blocks:
        assert np.array_equal(b, np.sort(b))
    again = _fold_blocks(103, 5, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(blocks, again))


def test_cv_singleton_grid():
    sample = make_sample(250, 9)
    cfg = make_config(
        sample, points=np.linspace(0.1, 0.9, 12), cv_folds=3,
        cv_lambda_grid=(0.01,),
    )
    cv = cross_validate_lambda(sample, cfg)
    assert cv.lambda_cv == 0.01
    fit = two_step_fit(sample, cfg)
    assert fit.lambda_used == pytest.approx(0.02)


def test_cv_scales_agree_for_identity():
    sample = make_sample(350, 4)
    grid = (0.5, 0.05, 0.005)
    base = dict(points=np.linspace(0.1, 0.9, 12), cv_folds=3,
                cv_lambda_grid=grid, seed=3)
    cv_tau = cross_validate_lambda(sample, make_config(sample, **base))
    cv_lin = cross_validate_lambda(
        sample, make_config(sample, cv_scale="transformed", **base)
    )
    assert np.allclose(cv_tau.errors, cv_lin.errors)
    assert cv_tau.lambda_cv == cv_lin.lambda_cv


def test_cv_swap_roles_runs():
    sample = make_sample(250, 6)
    cfg = make_config(
        sample, points=np.linspace(0.1, 0.9, 12), cv_folds=3,
        cv_swap_roles=True, cv_lambda_grid=(0.1, 0.01),
    )
    cv = cross_validate_lambda(sample, cfg)
    assert cv.lambda_cv in (0.1, 0.01)
    assert cv.skipped_folds == 0


def test_training_error_monotone_in_lambda():
    sample = make_sample(800, 8)
    pts = np.linspace(0.05, 0.95, 30)
    errs = []
    for lam in (0.0, 0.05):
        cfg = make_config(sample, points=pts, lam=lam)
        fit = two_step_fit(sample, cfg)
        valid = np.array([e.valid for e in fit.first_stage])
        y = np.array([e.value for e in fit.first_stage])[valid]
        x = design_matrix(cfg.dictionary, cfg.design_points[valid])
        r = y - x @ fit.beta
        errs.append(float(r @ r))
    assert errs[0] <= errs[1] + 1e-12


def test_standardize_matches_ols_at_zero_lambda():
    sample = make_sample(600, 10)
    pts = np.linspace(0.05, 0.95, 30)
    a = two_step_fit(sample, make_config(sample, points=pts, lam=0.0))
    b = two_step_fit(
        sample, make_config(sample, points=pts, lam=0.0, standardize=False)
    )
    assert np.allclose(a.beta, b.beta, rtol=1e-6, atol=1e-8)


def test_standardized_solution_maps_back():
    sample = make_sample(600, 12)
    pts = np.linspace(0.05, 0.95, 40)
    cfg = make_config(sample, points=pts, lam=0.02)
    fit = two_step_fit(sample, cfg)
    valid = np.array([e.valid for e in fit.first_stage])
    tau = np.array([e.value for e in fit.first_stage])
    x = design_matrix(cfg.dictionary, pts[valid])
    shift, scale = x.mean(axis=0), x.std(axis=0)
    fixed = scale <= 1e-12
    shift[fixed], scale[fixed] = 0.0, 1.0
    xs = (x - shift) / scale
    ybar = tau[valid].mean()  # identity transform: response is tau itself
    assert np.allclose(x @ fit.beta, xs @ fit.solution.beta + ybar, atol=1e-10)
    # support agrees away from the constant term; the centered problem's
    # constant coefficient solves to zero
    ci = cfg.dictionary.constant_index
    assert fit.solution.beta[ci] == 0.0
    mask = np.arange(x.shape[1]) != ci
    assert np.array_equal(fit.beta[mask] != 0, fit.solution.beta[mask] != 0)


def test_excluded_points_are_counted_not_imputed():
    rng = np.random.default_rng(0)
    sample = Sample(rng.normal(size=200), rng.normal(size=200),
                    rng.uniform(0, 1, 200))
    cfg = FitConfig(
        kernel=KernelSpec("epanechnikov", 0.2, 1),
        dictionary=constant_dictionary(),
        design_points=np.array([0.5, 50.0]),
        lam=0.0,
    )
    fit = two_step_fit(sample, cfg)
    assert fit.excluded_points == 1
    assert len(fit.first_stage) == 2
    assert [e.valid for e in fit.first_stage] == [True, False]
    assert fit.beta.shape == (1,)
    assert np.isfinite(fit.beta).all()


def test_config_validation():
    d = build_family_1d()
    k = KernelSpec("gaussian", 0.1, 1)
    pts = np.linspace(0.1, 0.9, 5)
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=d, design_points=np.empty((0, 1)))
    with pytest.raises(ArgumentError):
        FitConfig(kernel=KernelSpec("gaussian", 0.1, 2), dictionary=d,
                  design_points=pts)
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=d, design_points=pts, lam=-1.0)
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=d, design_points=pts, lam="best")
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=d, design_points=pts, cv_folds=1)
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=d, design_points=pts, cv_scale="mse")
    boxed = with_input_box(constant_dictionary(), [0.0], [1.0])
    with pytest.raises(ArgumentError):
        FitConfig(kernel=k, dictionary=boxed, design_points=np.array([1.5]))


def test_json_roundtrip():
    sample = make_sample(300, 14)
    cfg = make_config(
        sample, points=np.linspace(0.1, 0.9, 15), lam=0.01,
        transform=TransformSpec("fisher"),
    )
    fit = two_step_fit(sample, cfg)
    doc = json.loads(json.dumps(to_json_dict(fit)))
    assert doc["schema"] == "ckreg.fit_result/1"
    assert doc["config"]["standardize"] is True
    back = from_json_dict(doc)
    assert np.allclose(back.beta, fit.beta)
    zs = np.array([0.2, 0.5, 0.8])
    assert np.allclose(predict(back, zs), predict(fit, zs))
    assert back.lambda_used == fit.lambda_used
    assert back.config.transform.family == "fisher"


def test_from_json_rejects_unknown_schema():
    with pytest.raises(ArgumentError):
        from_json_dict({"schema": "something/9"})
