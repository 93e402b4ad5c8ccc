import math

import numpy as np
import pytest

from dnnr.dataset import Dataset
from dnnr.errors import ConfigError, DataError
from dnnr.predictor import DnnrConfig, fit_dnnr
from dnnr.theory import (
    BallMassEstimate,
    BoundInputs,
    estimate_tau,
    gradient_error_bound,
    guarantee_conditions,
    pointwise_tolerances,
    ball_mass_estimate,
    uniform_cube_ball_mass,
)


def line_and_cluster_dataset():
    """Three collinear points (rank-deficient neighborhoods with k'=2) plus
    a well-spread far cluster."""
    x = np.array([
        [0.0, 0.0], [1.0, 0.0], [2.0, 0.0],
        [10.0, 10.0], [11.0, 10.5], [10.5, 11.2],
    ])
    y = np.arange(6.0)
    return Dataset(x, y)


def test_gradient_error_bound_trivial_value():
    # single unit direction: 2 * 0.1 / (1 * 2!) * 1 = 0.1
    assert gradient_error_bound(1.0, 0.1, 1, 2.0, [1.0]) == pytest.approx(0.1, abs=1e-15)


def test_gradient_error_bound_shrinks_linearly_in_h():
    b1 = gradient_error_bound(1.0, 0.2, 1, 3.0, [1.0, 1.2])
    b2 = gradient_error_bound(1.0, 0.1, 1, 3.0, [1.0, 1.2])
    assert b2 == pytest.approx(b1 / 2.0, rel=1e-12)
    # second order shrinks quadratically
    q1 = gradient_error_bound(1.0, 0.2, 2, 3.0, [1.0, 1.2])
    q2 = gradient_error_bound(1.0, 0.1, 2, 3.0, [1.0, 1.2])
    assert q2 == pytest.approx(q1 / 4.0, rel=1e-12)


def test_gradient_error_bound_rank_deficient_is_infinite():
    assert gradient_error_bound(0.0, 0.1, 1, 2.0, [1.0]) == math.inf
    assert gradient_error_bound(-1.0, 0.1, 1, 2.0, [1.0]) == math.inf


def test_gradient_error_bound_validation():
    with pytest.raises(ConfigError):
        gradient_error_bound(1.0, 0.0, 1, 2.0, [1.0])
    with pytest.raises(ConfigError):
        gradient_error_bound(1.0, 0.1, 0, 2.0, [1.0])
    with pytest.raises(ConfigError):
        gradient_error_bound(1.0, 0.1, 1, -2.0, [1.0])
    with pytest.raises(ConfigError):
        gradient_error_bound(1.0, 0.1, 1, 2.0, [])
    with pytest.raises(ConfigError):
        gradient_error_bound(1.0, 0.1, 1, 2.0, [0.5])


def test_gradient_error_bound_holds_empirically():
    # f(x) = sin(x0) + x1^2 has second directional derivatives bounded by 2
    from dnnr.gradient import fit_local

    rng = np.random.default_rng(11)
    for _ in range(100):
        anchor = rng.uniform(-2.0, 2.0, size=2)
        radii = rng.uniform(0.01, 0.3, size=5)
        dirs = rng.normal(size=(5, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = np.vstack([anchor, anchor + radii[:, None] * dirs])
        ys = np.sin(pts[:, 0]) + pts[:, 1] ** 2
        model = fit_local(pts, ys, 0, np.arange(1, 6), normalize_rows=True)
        true_grad = np.array([np.cos(anchor[0]), 2.0 * anchor[1]])
        err = np.linalg.norm(model.gamma - true_grad)
        bound = gradient_error_bound(
            model.sigma_min, model.h_max, 1, 2.0, model.direction_l1_norms
        )
        assert err <= bound + 1e-12


def test_guarantee_pinned_examples():
    report = guarantee_conditions(BoundInputs(lipschitz=40.0, delta=0.05, ball_mass=0.5))
    assert report.n_required == 60
    assert report.n_required == math.ceil(16.0 * math.log(40.0))

    report = guarantee_conditions(
        BoundInputs(lipschitz=40.0, epsilon=0.1, tau=5.59, ball_mass=0.5)
    )
    assert report.h_star_dnnr == pytest.approx(0.01948, abs=5e-6)
    assert report.h_star_dnnr == pytest.approx(math.sqrt(0.1 / (40.0 * 6.59)), rel=1e-15)
    assert report.h_star_knn == 0.00125

    report = guarantee_conditions(
        BoundInputs(lipschitz=1.0, epsilon=0.5, delta=0.5, y_range=(0.0, 1.0))
    )
    assert report.k_min == 17
    assert report.k_min == math.ceil(8.0 * math.log(8.0))


def test_guarantee_eps_round_trip_and_dominance():
    inputs = BoundInputs(lipschitz=40.0, epsilon=0.1, tau=5.59, ball_mass=0.5)
    report = guarantee_conditions(inputs)
    # both tolerances are evaluated at h_star_dnnr, so eps_dnnr inverts back
    # to epsilon and eps_knn sits above it whenever tau < 2/h - 1
    assert report.eps_dnnr == pytest.approx(inputs.epsilon, rel=1e-12)
    assert report.eps_knn == pytest.approx(2.0 * 40.0 * report.h_star_dnnr, rel=1e-15)
    assert inputs.tau < 2.0 / report.h_star_dnnr - 1.0
    assert report.eps_dnnr < report.eps_knn


def test_guarantee_monotonicities():
    def rep(**kw):
        base = dict(lipschitz=40.0, epsilon=0.1, tau=5.59, ball_mass=0.5)
        base.update(kw)
        return guarantee_conditions(BoundInputs(**base))

    assert rep(ball_mass=0.25).n_required > rep(ball_mass=0.5).n_required
    assert rep(epsilon=0.05).k_min > rep(epsilon=0.1).k_min
    assert rep(tau=10.0).h_star_dnnr < rep(tau=5.59).h_star_dnnr


def test_guarantee_feasibility_flag():
    # huge training set: plenty of neighbors inside the ball
    feasible = guarantee_conditions(
        BoundInputs(lipschitz=40.0, ball_mass=0.5, n_train=10_000_000)
    )
    assert feasible.feasible
    assert feasible.k_min <= feasible.k_max
    # tiny training set cannot satisfy the neighbor-count requirement
    infeasible = guarantee_conditions(
        BoundInputs(lipschitz=40.0, ball_mass=0.5, n_train=100)
    )
    assert not infeasible.feasible
    assert infeasible.k_min > infeasible.k_max


def test_guarantee_astronomical_sample_sizes():
    report = guarantee_conditions(
        BoundInputs(lipschitz=40.0, delta=0.05, ball_mass=1e-310)
    )
    assert report.n_required > 10**310
    want_log10 = math.log10(8.0) + 310.0 + math.log10(math.log(40.0))
    assert report.log10_n_required == pytest.approx(want_log10, rel=1e-12)
    # leading digits of the reconstructed integer match the log
    lead = report.n_required / 10 ** (len(str(report.n_required)) - 1)
    assert lead == pytest.approx(10 ** (want_log10 % 1.0), rel=1e-9)


def test_bound_inputs_validation():
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=0.0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, mu=0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, delta=1.0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, epsilon=-1.0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, y_range=(1.0, 1.0)).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, ball_mass=0.0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, ball_mass=1.5).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, tau=0.0).validate()
    with pytest.raises(ConfigError):
        BoundInputs(lipschitz=1.0, n_train=0).validate()


def test_estimate_tau_trivial_unit_geometry():
    # two points at distance 1: the anchor's only fit neighbor gives
    # nu = +-1 and sigma_min = 1, so the contribution is exactly 1.0
    data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=1))
    est = estimate_tau(model, np.array([[0.05]]))
    assert est.value == 1.0
    assert est.n_used == 1
    assert est.n_excluded == 0
    assert est.mean_sigma_min == 1.0


def test_estimate_tau_excludes_degenerate_anchors():
    data = line_and_cluster_dataset()
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=2))
    # one sample near the collinear cluster (rank-deficient), one near the
    # well-spread cluster
    est = estimate_tau(model, np.array([[0.9, 0.1], [10.1, 10.0]]))
    assert est.n_excluded == 1
    assert est.n_used == 1
    assert math.isfinite(est.value) and est.value > 0


def test_estimate_tau_all_degenerate_raises():
    data = line_and_cluster_dataset()
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=2))
    with pytest.raises(DataError, match="rank-deficient"):
        estimate_tau(model, np.array([[0.1, 0.0], [1.9, 0.0]]))


def test_estimate_tau_input_validation(rng):
    data = Dataset(rng.random((20, 2)), rng.random(20))
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=4))
    with pytest.raises(ConfigError):
        estimate_tau(model, np.zeros((2, 2)), mu=0)
    with pytest.raises(DataError):
        estimate_tau(model, np.zeros((2, 3)))
    with pytest.raises(DataError):
        estimate_tau(model, np.array([[np.nan, 0.0]]))


def test_pointwise_tolerances_exact_tiny_geometry():
    # anchors at 0 and 1; query 0.1 with k=1 gives h = 0.1 and the anchor's
    # fit neighbor at distance 1 gives tau_local = 1
    data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=1))
    tol = pointwise_tolerances(model, np.array([[0.1]]), lipschitz=40.0)
    assert tol.h[0] == pytest.approx(0.1, rel=1e-12)
    assert tol.tau_local[0] == 1.0
    assert tol.eps_dnnr[0] == pytest.approx(0.1**2 * 40.0 * 2.0, rel=1e-12)
    assert tol.eps_knn[0] == pytest.approx(2.0 * 40.0 * 0.1, rel=1e-12)
    assert tol.n_excluded_anchors == 0


def test_pointwise_tolerances_formula_and_dominance(rng):
    x = rng.random((300, 3))
    y = np.sin(3.0 * x[:, 0]) + x[:, 1]
    model = fit_dnnr(Dataset(x, y), DnnrConfig(k=4, k_prime=8))
    pts = rng.random((50, 3))
    tol = pointwise_tolerances(model, pts, lipschitz=10.0)
    np.testing.assert_allclose(
        tol.eps_dnnr, tol.h**2 * 10.0 * (1.0 + tol.tau_local), rtol=1e-12
    )
    np.testing.assert_allclose(tol.eps_knn, 2.0 * 10.0 * tol.h, rtol=1e-12)
    # tighter-than-knn holds exactly when tau_local < 2 / h - 1
    in_regime = tol.tau_local < 2.0 / tol.h - 1.0
    np.testing.assert_array_equal(tol.eps_dnnr < tol.eps_knn, in_regime)


def test_pointwise_dominance_on_dense_grid():
    # A dense 1-d grid keeps tau_local near 1/h while the threshold is
    # 2/h - 1, so the quadratic tolerance beats the linear one everywhere.
    x = np.linspace(0.0, 1.0, 1001)[:, None]
    model = fit_dnnr(Dataset(x, np.sin(3.0 * x[:, 0])),
                     DnnrConfig(k=1, k_prime=2))
    pts = np.random.default_rng(2).uniform(0.05, 0.95, size=(40, 1))
    tol = pointwise_tolerances(model, pts, lipschitz=10.0)
    assert np.all(tol.tau_local < 2.0 / tol.h - 1.0)
    assert np.all(tol.eps_dnnr < tol.eps_knn)


def test_pointwise_tolerance_ratio_vanishes_as_h_shrinks():
    # quadratic versus linear: eps_dnnr / eps_knn -> 0 with the radius
    x = np.linspace(0.0, 1.0, 51)[:, None]
    data = Dataset(x, x.ravel())
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=2))
    offsets = np.array([[0.008], [0.004], [0.002], [0.001]]) + 0.5
    tol = pointwise_tolerances(model, offsets, lipschitz=5.0)
    ratio = tol.eps_dnnr / tol.eps_knn
    assert np.all(np.diff(ratio) < 0)
    np.testing.assert_allclose(ratio, tol.h * (1.0 + tol.tau_local) / 2.0, rtol=1e-12)


def test_pointwise_tolerances_all_degenerate_point_raises():
    data = line_and_cluster_dataset()
    model = fit_dnnr(data, DnnrConfig(k=1, k_prime=2))
    with pytest.raises(DataError, match="test point 0"):
        pointwise_tolerances(model, np.array([[1.1, 0.0]]), lipschitz=1.0)


def test_pointwise_tolerances_counts_excluded_anchors():
    data = line_and_cluster_dataset()
    model = fit_dnnr(data, DnnrConfig(k=6, k_prime=2))
    tol = pointwise_tolerances(model, np.array([[5.0, 5.0]]), lipschitz=1.0)
    # the three collinear anchors are degenerate but the far cluster keeps
    # the query usable
    assert tol.n_excluded_anchors == 3
    assert math.isfinite(tol.tau_local[0])


def test_ball_mass_full_cover_interval():
    rng = np.random.default_rng(0)
    est = ball_mass_estimate(lambda n: rng.random((n, 1)), np.array([0.5]), 0.5, 2000)
    assert est.mass == 1.0
    assert est.standard_error == 0.0
    assert est.n_hits == 2000


def test_ball_mass_half_interval():
    rng = np.random.default_rng(1)
    est = ball_mass_estimate(lambda n: rng.random((n, 1)), np.array([0.5]), 0.25, 20000)
    assert abs(est.mass - 0.5) <= 3.0 * est.standard_error + 1e-12
    assert est.standard_error == pytest.approx(
        math.sqrt(est.mass * (1.0 - est.mass) / 20000)
    )


def test_ball_mass_matches_independent_reference_d10():
    # independent Monte-Carlo reference with its own generator
    ref_rng = np.random.default_rng(12345)
    draws = ref_rng.random((1_000_000, 10))
    inside = ((draws - 0.5) ** 2).sum(axis=1) <= 0.3**2
    ref = inside.mean()
    ref_se = math.sqrt(ref * (1.0 - ref) / 1_000_000)

    rng = np.random.default_rng(77)
    est = ball_mass_estimate(
        lambda n: rng.random((n, 10)), np.full(10, 0.5), 0.3, 200_000
    )
    assert abs(est.mass - ref) <= 3.0 * math.hypot(est.standard_error, ref_se)


def test_ball_mass_linf_metric_fixed_center():
    rng = np.random.default_rng(2)
    est = ball_mass_estimate(
        lambda n: rng.random((n, 2)), np.array([0.5, 0.5]), 0.25, 50000, metric="linf"
    )
    assert abs(est.mass - 0.25) <= 3.0 * est.standard_error + 1e-12


def test_ball_mass_zero_hits_warns():
    rng = np.random.default_rng(3)
    with pytest.warns(UserWarning, match="no Monte-Carlo draws"):
        est = ball_mass_estimate(lambda n: rng.random((n, 1)), np.array([100.0]), 0.1, 1000)
    assert est.mass == 0.0
    assert est.n_hits == 0


def test_ball_mass_validation():
    rng = np.random.default_rng(4)
    sampler = lambda n: rng.random((n, 2))
    with pytest.raises(ConfigError, match="n_mc"):
        ball_mass_estimate(sampler, np.zeros(2), 0.5, 999)
    with pytest.raises(ConfigError, match="radius"):
        ball_mass_estimate(sampler, np.zeros(2), 0.0, 1000)
    with pytest.raises(ConfigError, match="metric"):
        ball_mass_estimate(sampler, np.zeros(2), 0.5, 1000, metric="manhattan")
    with pytest.raises(DataError, match="shape"):
        ball_mass_estimate(lambda n: rng.random((n, 3)), np.zeros(2), 0.5, 1000)


def test_uniform_cube_ball_mass_analytic():
    assert uniform_cube_ball_mass(0.25, 1) == pytest.approx(0.4375, rel=1e-15)
    assert uniform_cube_ball_mass(0.25, 2) == pytest.approx(0.4375**2, rel=1e-15)
    assert uniform_cube_ball_mass(1.0, 5) == 1.0
    assert uniform_cube_ball_mass(2.0, 5) == 1.0
    # cross-check the per-dimension average coverage by quadrature
    h = 0.3
    centers = np.linspace(0.0, 1.0, 100001)
    cover = np.minimum(centers + h, 1.0) - np.maximum(centers - h, 0.0)
    want = np.trapezoid(cover, centers)
    assert uniform_cube_ball_mass(h, 1) == pytest.approx(want, rel=1e-6)
    with pytest.raises(ConfigError):
        uniform_cube_ball_mass(-0.1, 3)
    with pytest.raises(ConfigError):
        uniform_cube_ball_mass(0.1, 0)


def test_ball_mass_estimate_dataclass_fields():
    est = BallMassEstimate(mass=0.5, standard_error=0.01, n_hits=500, n_mc=1000)
    assert est.mass == 0.5 and est.n_mc == 1000
