import numpy as np
import pytest

from trigkrylov.linop import DenseOperator, IdentityOperator
from trigkrylov.krylov import (
    COARSE_FRACTIONS,
    KrylovProcess,
    ResidualCurve,
    StepSearchStagnation,
    coarse_residual_check,
    confirm_admissible,
    find_largest_admissible_step,
    krylov_build,
    residual_norm_at,
)
from trigkrylov.smallfun import ScalarFunKind, SpectralCache, psi, sigma, phi


def _spd_operator(rng, n, shift=2.0):
    a = rng.standard_normal((n, n))
    return DenseOperator(a @ a.T / n + shift * np.eye(n), is_symmetric=True)


def test_identity_happy_breakdown():
    d = krylov_build(IdentityOperator(6), np.ones(6), 3)
    assert d.m == 1 and d.breakdown and d.h_next == 0.0
    np.testing.assert_allclose(d.H_m, [[1.0]], atol=1e-14)


def test_full_dimension_recovers_spectrum():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0, 4.0]), is_symmetric=True)
    d = krylov_build(op, np.full(4, 0.5), 4)
    eigs = np.sort(np.linalg.eigvalsh(d.H_m))
    np.testing.assert_allclose(eigs, [1, 2, 3, 4], atol=1e-12)


@pytest.mark.parametrize("symmetric", [True, False])
def test_decomposition_identity(symmetric):
    rng = np.random.default_rng(1)
    n, m = 50, 10
    a = rng.standard_normal((n, n))
    mat = a @ a.T / n + 2 * np.eye(n)
    if not symmetric:
        mat = mat + 0.5 * (rng.standard_normal((n, n)) - rng.standard_normal((n, n)).T)
    op = DenseOperator(mat, is_symmetric=symmetric)
    d = krylov_build(op, rng.standard_normal(n), m)
    lhs = mat @ d.V_m
    rhs = d.V @ d.H
    norm_a = np.linalg.norm(mat, 2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * norm_a * m
    assert d.mode == ("lanczos" if symmetric else "arnoldi")


def test_reorthogonalized_basis_orthonormal():
    rng = np.random.default_rng(2)
    op = _spd_operator(rng, 60)
    d = krylov_build(op, rng.standard_normal(60), 25, reorth=True)
    v = d.V
    assert np.linalg.norm(v.T @ v - np.eye(v.shape[1])) <= 1e-8


def test_matvec_budget():
    rng = np.random.default_rng(3)
    op = _spd_operator(rng, 30)
    krylov_build(op, rng.standard_normal(30), 12)
    assert op.matvec_count == 12


def test_zero_start_vector_rejected():
    with pytest.raises(ValueError, match="zero starting vector"):
        krylov_build(IdentityOperator(4), np.zeros(4), 2)


def _scalar_sigma_curve(lam=1.0, h_next=1.0, beta=1.0):
    cache = SpectralCache.from_tridiagonal(np.array([lam]), np.array([]), beta=beta)

    class D:
        pass

    d = D()
    d.h_next = h_next
    d.spectral_cache = lambda: cache
    return ResidualCurve(d, ScalarFunKind.SIGMA)


def test_residual_curve_closed_form_and_zero_time():
    curve = _scalar_sigma_curve()
    assert residual_norm_at(curve, 0.0) == 0.0
    for t in (0.4, 1.0, 2.5):
        assert curve.value(t) == pytest.approx(abs(np.sin(t)), rel=1e-13)


def test_breakdown_residual_is_zero():
    d = krylov_build(IdentityOperator(5), np.ones(5), 3)
    curve = ResidualCurve(d, ScalarFunKind.SIGMA)
    assert np.all(curve.values(np.linspace(0.1, 3.0, 7)) == 0.0)


@pytest.mark.parametrize("kind,n,m", [(ScalarFunKind.SIGMA, 40, 8),
                                      (ScalarFunKind.PSI, 40, 8)])
def test_residual_matches_finite_difference_oracle(kind, n, m):
    # Spectrum in [100, 400] keeps the m=8 residual far above the O(h^2)
    # finite-difference noise so the 1e-6 relative comparison is meaningful.
    rng = np.random.default_rng(8)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(100.0, 400.0, n)
    op = DenseOperator((q * lam) @ q.T, is_symmetric=True)
    w = rng.standard_normal(n)
    d = krylov_build(op, w, m)
    curve = ResidualCurve(d, kind)
    a_mat = op.matrix
    cache = d.spectral_cache()
    t, h = 1.0, 1e-5
    from trigkrylov.smallfun import projected_solution

    def y_at(s):
        return d.V_m @ projected_solution(None, kind, d.beta, s, cache)

    ypp = (y_at(t - h) - 2 * y_at(t) + y_at(t + h)) / h**2
    forcing = w if kind == ScalarFunKind.PSI else 0.0
    resid = -a_mat @ y_at(t) + forcing - ypp
    assert curve.value(t) > 1e-3  # sanity: genuinely unconverged instance
    assert np.linalg.norm(resid) == pytest.approx(curve.value(t), rel=1e-6)


@pytest.mark.parametrize("symmetric", [True, False])
@pytest.mark.parametrize("kind", [ScalarFunKind.PSI, ScalarFunKind.SIGMA,
                                  ScalarFunKind.PHI])
def test_residual_identity_analytic(symmetric, kind):
    """Formula residual -h (e_m^T u) v_{m+1} vs the explicit IVP residual."""
    rng = np.random.default_rng(17)
    n, m = 40, 8
    a = rng.standard_normal((n, n))
    mat = a @ a.T / n + 2 * np.eye(n)
    if not symmetric:
        mat = mat + 0.4 * (rng.standard_normal((n, n)) - rng.standard_normal((n, n)).T)
    op = DenseOperator(mat, is_symmetric=symmetric)
    w = rng.standard_normal(n)
    beta = np.linalg.norm(w)
    d = krylov_build(op, w, m)
    cache = d.spectral_cache()
    from trigkrylov.smallfun import projected_solution

    t = 0.9
    u = projected_solution(None, kind, d.beta, t, cache)
    e1 = np.zeros(m)
    e1[0] = beta
    if kind == ScalarFunKind.PHI:
        updot = -d.H_m @ u + e1
        explicit = -mat @ (d.V_m @ u) + w - d.V_m @ updot
    else:
        updd = -d.H_m @ u + (e1 if kind == ScalarFunKind.PSI else 0.0)
        forcing = w if kind == ScalarFunKind.PSI else 0.0
        explicit = -mat @ (d.V_m @ u) + forcing - d.V_m @ updd
    formula = -d.h_next * u[-1] * d.V[:, -1]
    scale = max(np.linalg.norm(formula), 1e-30)
    assert np.linalg.norm(explicit - formula) <= 1e-10 * max(scale, np.linalg.norm(w))
    # Galerkin orthogonality of the residual
    gal = np.linalg.norm(d.V_m.T @ explicit)
    bound = 1e-8 * (np.linalg.norm(mat, 2) * np.linalg.norm(d.V_m @ u) + beta)
    assert gal <= bound


def test_coarse_check_closed_forms():
    curve = _scalar_sigma_curve()
    assert coarse_residual_check(curve, np.pi / 2, 1.0)
    assert not coarse_residual_check(curve, np.pi / 2, 0.5)
    broken = ResidualCurve(krylov_build(IdentityOperator(4), np.ones(4), 2),
                           ScalarFunKind.SIGMA)
    assert coarse_residual_check(broken, 1.0, 0.0)


def test_find_step_zero_residual_returns_horizon():
    broken = ResidualCurve(krylov_build(IdentityOperator(4), np.ones(4), 2),
                           ScalarFunKind.SIGMA)
    assert find_largest_admissible_step(broken, 2.0, 1e-12) == 2.0


def test_find_step_sine_halving_example():
    # |sin s| with t=100, tol=0.5: base step 1 fails, 0.5 admits, first
    # violation at s=1.0, so delta = 0.5.
    curve = _scalar_sigma_curve()
    assert find_largest_admissible_step(curve, 100.0, 0.5) == pytest.approx(0.5)


def test_find_step_monotone_property():
    # phi-kind scalar curve is monotone: residual(delta) <= tol < residual(delta + dt)
    cache = SpectralCache.from_tridiagonal(np.array([2.0]), np.array([]), beta=1.0)

    class D:
        h_next = 0.7
        spectral_cache = staticmethod(lambda: cache)

    curve = ResidualCurve(D(), ScalarFunKind.PHI)
    t, tol = 3.0, 0.1
    delta = find_largest_admissible_step(curve, t, tol)
    k = 0
    while curve.value(t / (2**k * 100)) > tol:
        k += 1
    dt = t / (2**k * 100)
    assert curve.value(delta) <= tol
    assert curve.value(delta + dt) > tol


def test_find_step_ties_are_admissible():
    curve = _scalar_sigma_curve()
    tol = abs(np.sin(0.02))  # exact tie at the second grid point of dt=0.01
    delta = find_largest_admissible_step(curve, 1.0, tol)
    assert delta >= 0.02


def test_step_search_stagnation():
    curve = _scalar_sigma_curve(lam=1.0, h_next=1.0, beta=1.0)
    with pytest.raises(StepSearchStagnation):
        find_largest_admissible_step(curve, 1.0, 1e-20)


def test_confirm_admissible_catches_aliased_spike():
    # Single-frequency curve whose six coarse samples all alias near zeros
    # of 1 - cos: residual(s) = |sin(w s)| with w chosen so t/6 lands on pi.
    w = 6 * np.pi  # samples at t*k/6 with t=1 give sin(pi k) = 0 exactly
    cache = SpectralCache.from_tridiagonal(np.array([w * w]), np.array([]), beta=1.0)

    class D:
        h_next = 1.0
        spectral_cache = staticmethod(lambda: cache)

    curve = ResidualCurve(D(), ScalarFunKind.SIGMA)
    # values at coarse samples are ~0 but the curve peaks at 1/w in between
    assert coarse_residual_check(curve, 1.0, 1e-6)
    assert not confirm_admissible(curve, 1.0, 1e-6)


def test_exactness_at_full_dimension():
    rng = np.random.default_rng(30)
    n = 16
    op = _spd_operator(rng, n)
    from trigkrylov.integrators import SecondOrderIVP, SolverConfig, rt_sequential
    from trigkrylov.smallfun import exact_ivp_solution

    ivp = SecondOrderIVP(op, rng.standard_normal(n), rng.standard_normal(n),
                         rng.standard_normal(n), 1.5)
    report = rt_sequential(ivp, SolverConfig(tol=1e-8, m_max=n))
    y_ref, _ = exact_ivp_solution(ivp, 1.5)
    assert np.linalg.norm(report.y - y_ref) <= 1e-10 * np.linalg.norm(y_ref)


def test_process_mode_and_argument_guards():
    op = IdentityOperator(6)
    with pytest.raises(ValueError, match="unknown mode"):
        KrylovProcess(op, np.ones(6), mode="qr")
    with pytest.raises(ValueError, match="stored basis"):
        KrylovProcess(op, np.ones(6), mode="lanczos3", reorth=True)
    proc = KrylovProcess(op, np.ones(6), mode="lanczos3")
    proc.step()
    with pytest.raises(ValueError, match="basis"):
        proc.snapshot().V_m
    with pytest.raises(ValueError):
        residual_norm_at(_scalar_sigma_curve(), -1.0)
    with pytest.raises(ValueError):
        coarse_residual_check(_scalar_sigma_curve(), 0.0, 1.0)
    with pytest.raises(ValueError):
        find_largest_admissible_step(_scalar_sigma_curve(), 0.0, 1.0)
    with pytest.raises(ValueError, match="dimension"):
        krylov_build(op, np.ones(6), 7)


def test_breakdown_step_refused_after_flag():
    proc = KrylovProcess(IdentityOperator(4), np.ones(4))
    proc.step()
    assert proc.breakdown
    with pytest.raises(RuntimeError, match="breakdown"):
        proc.step()


def test_prop_bounds_dominate_measured_curve():
    from trigkrylov.bounds import bound_input_from_decompositions, bound_prop22, bound_prop23

    rng = np.random.default_rng(19)
    n, m = 40, 7
    op = _spd_operator(rng, n)
    w_psi = rng.standard_normal(n)
    w_sigma = rng.standard_normal(n)
    d_psi = krylov_build(op, w_psi, m)
    d_sigma = krylov_build(op, w_sigma, m)
    c_psi = ResidualCurve(d_psi, ScalarFunKind.PSI)
    c_sigma = ResidualCurve(d_sigma, ScalarFunKind.SIGMA)
    for t in (0.2, 0.8, 1.6, 4.0):
        measured = c_psi.value(t) + c_sigma.value(t)
        bi = bound_input_from_decompositions(d_psi, d_sigma, t, "spd")
        assert measured <= bound_prop22(bi) * (1 + 1e-9)
        simple, tight = bound_prop23(bi)
        assert measured <= tight * (1 + 1e-9)
        assert measured <= simple * (1 + 1e-9)
