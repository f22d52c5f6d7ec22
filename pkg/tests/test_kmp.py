import numpy as np
import pytest
import sympy as sp

from quatkmp import kmp
from quatkmp.errors import DimError, LayoutError, SolveError
from quatkmp.gmm import Reference

GAUSS = kmp.KernelSpec.gaussian(0.01)
PERIODIC = kmp.KernelSpec.periodic(0.4, 10.0)

_a, _b = sp.symbols("a b")


def analytic_gaussian(length, p, q):
    """d^(p+q) k / da^p db^q for k = exp(-length (a - b)^2), as a numpy function."""
    k = sp.exp(-sp.nsimplify(length) * (_a - _b) ** 2)
    expr = k
    if p:
        expr = sp.diff(expr, _a, p)
    if q:
        expr = sp.diff(expr, _b, q)
    return sp.lambdify((_a, _b), expr, "numpy")


def analytic_periodic(length, period, p, q):
    k = sp.exp(-sp.nsimplify(length) * sp.sin(sp.pi * (_a - _b) / sp.nsimplify(period)) ** 2)
    expr = k
    if p:
        expr = sp.diff(expr, _a, p)
    if q:
        expr = sp.diff(expr, _b, q)
    return sp.lambdify((_a, _b), expr, "numpy")


def block_value(spec, p, q, a, b):
    orders = (p, q) if p != q else (p,)
    S = kmp.derivative_blocks(spec, orders, [[a]], [[b]])
    return S[0, 0 if p == q else 1, 0, 0]


def test_scalar_kernel_values():
    assert kmp.scalar_kernel(GAUSS, 3.0, 3.0) == 1.0
    assert kmp.scalar_kernel(GAUSS, 0.0, 10.0) == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert kmp.scalar_kernel(PERIODIC, 1.3, 11.3) == pytest.approx(1.0, abs=1e-14)
    spec = kmp.KernelSpec.gaussian(0.5)
    assert kmp.scalar_kernel(spec, [0, 0, 0], [1, 1, 0]) == pytest.approx(np.exp(-1.0))


def test_periodic_kernel_rejects_multidim():
    with pytest.raises(LayoutError):
        kmp.scalar_kernel(PERIODIC, [0.0, 1.0], [1.0, 0.0])


def test_kernel_spec_validation():
    with pytest.raises(LayoutError):
        kmp.KernelSpec.gaussian(-1.0)
    with pytest.raises(LayoutError):
        kmp.KernelSpec("periodic", 0.4, None)
    with pytest.raises(LayoutError):
        kmp.KernelSpec.gaussian(0.1, delta=0.0)


def test_k_td_matches_first_derivative():
    f = analytic_gaussian(0.01, 0, 1)
    for ti, tj in [(0.0, 3.0), (7.5, 1.2), (4.0, 4.0)]:
        # d/dtj exp(-l (ti - tj)^2) = 2 l (ti - tj) k
        expected = 2 * 0.01 * (ti - tj) * np.exp(-0.01 * (ti - tj) ** 2)
        assert f(ti, tj) == pytest.approx(expected, abs=1e-15)
        assert abs(block_value(GAUSS, 0, 1, ti, tj) - expected) < 1e-3


def test_k_aa_matches_fourth_derivative():
    f = analytic_gaussian(0.01, 2, 2)
    assert f(3.0, 0.0) == pytest.approx(7.137436984494184e-4, rel=1e-12)
    for ti, tj in [(3.0, 0.0), (0.5, 9.0), (5.0, 5.0)]:
        assert block_value(GAUSS, 2, 2, ti, tj) == pytest.approx(f(ti, tj), rel=1e-2)


def test_naive_stencil_agrees_at_coarse_step():
    # the literal stencil is accurate only when cancellation is mild
    spec = kmp.KernelSpec.gaussian(0.01, delta=0.1)
    for p, q in [(0, 1), (1, 1), (2, 1), (2, 2)]:
        direct = kmp.derivative_kernel_direct(spec, p, q, 2.3, 0.4)
        assert block_value(spec, p, q, 2.3, 0.4) == pytest.approx(direct, rel=1e-6)


@pytest.mark.parametrize("p,q", [(0, 3), (3, 0), (1, 3), (3, 3)])
def test_jerk_blocks_match_analytic(p, q):
    f = analytic_gaussian(0.01, p, q)
    for ti, tj in [(1.0, 6.0), (8.2, 2.9)]:
        assert block_value(GAUSS, p, q, ti, tj) == pytest.approx(f(ti, tj), rel=2e-2)


@pytest.mark.parametrize("p,q", [(0, 1), (1, 1), (2, 0), (2, 2)])
def test_periodic_blocks_match_analytic(p, q):
    f = analytic_periodic(0.4, 10.0, p, q)
    for ti, tj in [(1.0, 6.5), (8.2, 2.9), (0.3, 0.1)]:
        assert block_value(PERIODIC, p, q, ti, tj) == pytest.approx(f(ti, tj), rel=1e-2, abs=1e-6)


def test_transpose_relations(rng):
    pts = rng.uniform(0, 10, (20, 2))
    for ti, tj in pts:
        S_ij = kmp.derivative_blocks(GAUSS, (0, 1, 2), [[ti]], [[tj]])[:, :, 0, 0]
        S_ji = kmp.derivative_blocks(GAUSS, (0, 1, 2), [[tj]], [[ti]])[:, :, 0, 0]
        np.testing.assert_allclose(S_ij, S_ji.T, rtol=1e-12, atol=1e-16)


def test_block_kernel_structure():
    B = kmp.block_kernel(GAUSS, kmp.time_deriv(), 1.0, 2.5)
    assert B.shape == (6, 6)
    S = kmp.derivative_blocks(GAUSS, (0, 1), [[1.0]], [[2.5]])[:, :, 0, 0]
    np.testing.assert_allclose(B, np.kron(S, np.eye(3)))
    assert kmp.block_kernel(GAUSS, kmp.time_accel(), 1.0, 2.5).shape == (9, 9)
    spec = kmp.KernelSpec.gaussian(1.0)
    a, b = np.array([0.1, 0.2, 0.3]), np.array([0.0, -0.1, 0.5])
    P = kmp.block_kernel(spec, kmp.plain(6), a, b)
    assert np.array_equal(P, kmp.scalar_kernel(spec, a, b) * np.eye(6))


def test_block_kernel_layout_errors():
    with pytest.raises(LayoutError):
        kmp.block_kernel(GAUSS, kmp.time_deriv(), [0.0, 1.0], [1.0, 0.0])
    with pytest.raises(LayoutError):
        kmp.block_kernel(GAUSS, kmp.plain(3), [0.0, 1.0], [1.0])


def test_gram_matrix_symmetric():
    t = np.linspace(0, 10, 15)
    K = kmp.gram_matrix(GAUSS, kmp.time_accel(), t)
    assert K.shape == (15 * 9, 15 * 9)
    np.testing.assert_allclose(K, K.T, atol=1e-10)


def make_reference(n=30, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 10, n)
    zeta = np.column_stack([np.sin(0.3 * t), 0.2 * t, np.cos(0.2 * t)])
    zdot = np.column_stack([0.3 * np.cos(0.3 * t), np.full(n, 0.2), -0.2 * np.sin(0.2 * t)])
    means = np.hstack([zeta, zdot])[:, :dim] + 1e-3 * rng.standard_normal((n, dim))
    covs = np.tile(1e-3 * np.eye(dim), (n, 1, 1))
    return Reference(t, means, covs)


def test_fit_single_point_closed_form():
    mu = np.array([0.3, -0.2, 0.1, 0.05, 0.0, -0.1])
    for lam, s2, tol in [(1.0, 1e-2, None), (1e-8, 1e-8, 1e-4)]:
        ref = Reference([[2.0]], mu[None], s2 * np.eye(6)[None])
        m = kmp.fit(ref, GAUSS, kmp.time_deriv(), lam)
        K = kmp.block_kernel(GAUSS, kmp.time_deriv(), 2.0, 2.0)
        expected = K @ np.linalg.solve(K + lam * s2 * np.eye(6), mu)
        got = kmp.predict(m, 2.0)
        np.testing.assert_allclose(got, expected, rtol=1e-8, atol=1e-12)
        if tol:
            np.testing.assert_allclose(got, mu, atol=tol)


def test_fit_deterministic_and_empty():
    ref = make_reference()
    a = kmp.fit(ref, GAUSS, kmp.time_deriv(), 1.0)
    b = kmp.fit(ref, GAUSS, kmp.time_deriv(), 1.0)
    assert np.array_equal(a.dual_coeffs, b.dual_coeffs)
    with pytest.raises(ValueError):
        kmp.fit(Reference(np.zeros((0, 1)), np.zeros((0, 6)), np.zeros((0, 6, 6))), GAUSS, kmp.time_deriv(), 1.0)
    with pytest.raises(DimError):
        kmp.fit(make_reference(dim=3), GAUSS, kmp.time_deriv(), 1.0)


def test_fit_reports_singular_system():
    # zero covariances and a vanishing lambda leave the Gram matrix alone: singular
    t = np.linspace(0, 10, 40)
    ref = Reference(t, np.zeros((40, 6)), np.tile(np.eye(6), (40, 1, 1)))
    with pytest.raises(SolveError):
        kmp.fit(ref, GAUSS, kmp.time_deriv(), 1e-30)


def test_predict_interpolates_at_small_regularization():
    ref = make_reference(n=10)
    ref = Reference(ref.inputs, ref.means, np.tile(1e-8 * np.eye(6), (10, 1, 1)))
    m = kmp.fit(ref, kmp.KernelSpec.gaussian(0.5), kmp.time_deriv(), 1e-2)
    np.testing.assert_allclose(kmp.predict(m, ref.inputs), ref.means, atol=1e-3)


def test_position_and_velocity_blocks_consistent():
    m = kmp.fit(make_reference(), GAUSS, kmp.time_deriv(), 1.0)
    h = 1e-3
    for t in [1.0, 4.2, 9.0]:
        out = kmp.predict(m, [t, t + h])
        fd = (out[1, :3] - out[0, :3]) / h
        assert np.max(np.abs(fd - out[0, 3:])) <= max(1e-2, 5 * h)


def test_periodic_prediction_repeats():
    t = np.linspace(0, 9.9, 50)
    means = np.column_stack([np.sin(2 * np.pi * t / 10)] * 3 + [np.cos(2 * np.pi * t / 10)] * 3)
    ref = Reference(t, means, np.tile(1e-2 * np.eye(6), (50, 1, 1)))
    m = kmp.fit(ref, PERIODIC, kmp.time_deriv(), 10.0)
    q = np.linspace(0, 10, 33)
    np.testing.assert_allclose(kmp.predict(m, q), kmp.predict(m, q + 10.0), atol=1e-9)


def test_prediction_linear_in_targets():
    ref = make_reference()
    scaled = Reference(ref.inputs, 2.5 * ref.means, ref.covs)
    a = kmp.predict(kmp.fit(ref, GAUSS, kmp.time_deriv(), 1.0), [0.5, 5.5])
    b = kmp.predict(kmp.fit(scaled, GAUSS, kmp.time_deriv(), 1.0), [0.5, 5.5])
    np.testing.assert_allclose(b, 2.5 * a, rtol=1e-9, atol=1e-14)


def test_adapt_reference_concatenation():
    ref = make_reference(n=5)
    d = kmp.DesiredEuclid([7.0], np.ones(6), 1e-8 * np.eye(6))
    assert kmp.adapt_reference(ref, []) is ref
    only = kmp.adapt_reference(None, [d])
    assert len(only) == 1 and np.array_equal(only.means[0], d.mean)
    ext = kmp.adapt_reference(ref, [d, d])
    assert len(ext) == 7
    np.testing.assert_array_equal(ext.means[:5], ref.means)
    np.testing.assert_array_equal(ext.inputs[5:, 0], [7.0, 7.0])
    with pytest.raises(DimError):
        kmp.adapt_reference(ref, [kmp.DesiredEuclid([1.0], np.ones(3), np.eye(3))])


def test_desired_point_requires_pd_cov():
    with pytest.raises(DimError):
        kmp.DesiredEuclid([1.0], np.ones(2), np.zeros((2, 2)))


def test_adaptation_pull_through():
    ref = make_reference()
    target = np.array([0.5, 2.0, -0.5, 0.0, 0.0, 0.0])
    errs = []
    for s2 in [1e-2, 1e-4, 1e-6, 1e-8]:
        d = kmp.DesiredEuclid([5.0], target, s2 * np.eye(6))
        m = kmp.fit(kmp.adapt_reference(ref, [d]), GAUSS, kmp.time_deriv(), 1.0)
        errs.append(np.max(np.abs(kmp.predict(m, 5.0) - target)))
    assert errs[-1] <= 1e-3
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_accel_augmentation_structure():
    ref = make_reference(n=4)
    aug = kmp.augment_reference(ref, 100.0)
    assert aug.output_dim == 9
    np.testing.assert_array_equal(aug.means[:, 6:], 0.0)
    np.testing.assert_array_equal(aug.covs[:, :6, :6], ref.covs)
    np.testing.assert_array_equal(aug.covs[:, 6:, 6:], np.tile(np.eye(3) / 100.0, (4, 1, 1)))
    np.testing.assert_array_equal(aug.covs[:, :6, 6:], 0.0)


def test_accel_constraint_vanishes_for_tiny_weight():
    ref = make_reference()
    base = kmp.fit(ref, GAUSS, kmp.time_deriv(), 1.0)
    m = kmp.fit_accel_constrained(ref, GAUSS, 1.0, 1e-8)
    q = np.linspace(0, 10, 21)
    np.testing.assert_allclose(kmp.predict(m, q)[:, :6], kmp.predict(base, q), atol=1e-4)
    assert m.layout.block_dim == 9 and m.lam_a == 1e-8


def test_accel_constraint_reduces_acceleration():
    ref = make_reference()
    q = np.linspace(0, 10, 101)
    acc = []
    for lam_a in [10.0, 1e3, 1e5]:
        m = kmp.fit_accel_constrained(ref, GAUSS, 1.0, lam_a)
        acc.append(np.sum(kmp.predict(m, q)[:, 6:] ** 2))
    assert acc[0] >= acc[1] >= acc[2]


def test_jerk_variant_layout():
    m = kmp.fit_accel_constrained(make_reference(), GAUSS, 1.0, 10.0, jerk=True)
    assert m.layout.orders == (0, 1, 3)
    assert kmp.predict(m, 2.0).shape == (9,)


def test_accel_requires_six_dim_reference():
    with pytest.raises(DimError):
        kmp.fit_accel_constrained(make_reference(dim=3), GAUSS, 1.0, 10.0)


def test_plain_layout_multi_input(rng):
    S = rng.uniform(-1, 1, (40, 3))
    Y = np.column_stack([S.sum(1), S[:, 0] * S[:, 1]])
    ref = Reference(S, Y, np.tile(1e-4 * np.eye(2), (40, 1, 1)))
    spec = kmp.KernelSpec.gaussian(1.0)
    m = kmp.fit(ref, spec, kmp.plain(2), 1.0)
    # standard kernel ridge with scalar noise gives the same answer
    K = kmp.kernel_matrix(spec, S, S)
    alpha = np.linalg.solve(K + 1e-4 * np.eye(40), Y)
    np.testing.assert_allclose(kmp.predict(m, S[:5]), K[:5] @ alpha, atol=1e-9)
    assert kmp.predict(m, S[0]).shape == (2,)
