"""Scalar and small-matrix evaluation of the trigonometric integrator functions.

The three generating functions are

    psi(z)   = 2 (1 - cos sqrt(z)) / z
    sigma(z) = sin(sqrt(z)) / sqrt(z)
    phi(z)   = (exp(z) - 1) / z

with value 1 at z = 0.  All are entire and even in sqrt(z), so the branch of
the square root is irrelevant.  ``cos_sqrt(z) = cos(sqrt(z))`` is the extra
function needed for velocity updates (it equals ``1 - z*psi(z)/2``).

For |z| below ``PADE_THRESHOLD`` the direct formulas are replaced by their
(1,1) Pade approximants, whose coefficients are derived from the Taylor
series and validated against an extended-precision series oracle in the
test suite.

Small matrices are handled by a symmetric (tridiagonal) eigendecomposition
or, in the general case, by a complex Schur form combined with the Parlett
recurrence; both factorizations are cached so that many evaluation times t
reuse a single factorization.
"""
from __future__ import annotations

import enum
import warnings

import numpy as np
import scipy.linalg

from . import linop

PADE_THRESHOLD = 1e-3

#: Separation below which triangular diagonal entries count as confluent.
PARLETT_CLUSTER_TOL = 1e-8


class ScalarFunKind(enum.Enum):
    PSI = "psi"
    SIGMA = "sigma"
    PHI = "phi"
    COS = "cos"


class ParlettPerturbationWarning(UserWarning):
    """Clustered triangular diagonal was perturbed to evaluate the function."""


def _prepare(z, needs_complex_for_negative=True):
    z = np.asarray(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    real_input = not np.iscomplexobj(z)
    if real_input:
        z = z.astype(float)
        if needs_complex_for_negative and np.any(z < 0):
            z = z.astype(complex)
    return z, scalar, real_input


def _finish(out, scalar, real_input):
    if real_input and np.iscomplexobj(out):
        out = out.real
    return out[0] if scalar else out


def sigma(z):
    """sin(sqrt(z))/sqrt(z), elementwise; sigma(0) = 1."""
    zw, scalar, real_input = _prepare(z)
    small = np.abs(zw) < PADE_THRESHOLD
    s = np.sqrt(np.where(small, 1.0, zw))
    direct = np.sin(s) / s
    pade = (1.0 - 7.0 * zw / 60.0) / (1.0 + zw / 20.0)
    return _finish(np.where(small, pade, direct), scalar, real_input)


def psi(z):
    """2(1 - cos(sqrt(z)))/z, elementwise; psi(0) = 1.

    Evaluated as sigma(z/4)^2 via the half-angle identity, which avoids the
    cancellation of the 1 - cos form.
    """
    zw, scalar, real_input = _prepare(z)
    small = np.abs(zw) < PADE_THRESHOLD
    s2 = np.sqrt(np.where(small, 1.0, zw)) / 2.0
    half = np.sin(s2) / s2
    pade = (1.0 - zw / 20.0) / (1.0 + zw / 30.0)
    return _finish(np.where(small, pade, half * half), scalar, real_input)


def phi(z):
    """(exp(z) - 1)/z, elementwise; phi(0) = 1.

    The small-argument branch is a six-term Taylor polynomial (truncation
    below 1e-22 at the threshold), since the (1,1) Pade form would lose
    three digits there.
    """
    zw, scalar, real_input = _prepare(z, needs_complex_for_negative=False)
    small = np.abs(zw) < PADE_THRESHOLD
    zsafe = np.where(small, 1.0, zw)
    with np.errstate(over="ignore"):  # phi overflows to inf beyond z ~ 709
        if np.iscomplexobj(zw):
            direct = (np.exp(zsafe) - 1.0) / zsafe
        else:
            direct = np.expm1(zsafe) / zsafe
    series = 1.0 + zw * (
        1.0 / 2.0 + zw * (1.0 / 6.0 + zw * (1.0 / 24.0 + zw * (1.0 / 120.0 + zw / 720.0)))
    )
    return _finish(np.where(small, series, direct), scalar, real_input)


def cos_sqrt(z):
    """cos(sqrt(z)), elementwise.  Equals 1 - z*psi(z)/2; stable everywhere."""
    zw, scalar, real_input = _prepare(z)
    return _finish(np.cos(np.sqrt(zw)), scalar, real_input)


def _sigma_prime(z):
    zw, scalar, real_input = _prepare(z)
    small = np.abs(zw) < PADE_THRESHOLD
    zsafe = np.where(small, 1.0, zw)
    direct = (np.cos(np.sqrt(zsafe)) - sigma(zsafe)) / (2.0 * zsafe)
    series = -1.0 / 6.0 + zw / 60.0 - zw * zw / 1680.0
    return _finish(np.where(small, series, direct), scalar, real_input)


def _psi_prime(z):
    zw, scalar, real_input = _prepare(z)
    small = np.abs(zw) < PADE_THRESHOLD
    zsafe = np.where(small, 1.0, zw)
    direct = (sigma(zsafe) - psi(zsafe)) / zsafe
    series = -1.0 / 12.0 + zw / 180.0 - zw * zw / 6720.0
    return _finish(np.where(small, series, direct), scalar, real_input)


def _phi_prime(z):
    zw, scalar, real_input = _prepare(z, needs_complex_for_negative=False)
    small = np.abs(zw) < PADE_THRESHOLD
    zsafe = np.where(small, 1.0, zw)
    direct = (np.exp(zsafe) - phi(zsafe)) / zsafe
    series = 0.5 + zw / 3.0 + zw * zw / 8.0
    return _finish(np.where(small, series, direct), scalar, real_input)


def _cos_sqrt_prime(z):
    return -sigma(z) / 2.0


_FUNS = {
    ScalarFunKind.PSI: (psi, _psi_prime),
    ScalarFunKind.SIGMA: (sigma, _sigma_prime),
    ScalarFunKind.PHI: (phi, _phi_prime),
    ScalarFunKind.COS: (cos_sqrt, _cos_sqrt_prime),
}


def scalar_fun(kind: ScalarFunKind, z):
    """Evaluate one of psi, sigma, phi, cos_sqrt at a scalar or array argument."""
    return _FUNS[kind][0](z)


def _parlett_columnwise(t_mat, fvals):
    """f(T) for upper-triangular T with well-separated diagonal entries."""
    m = t_mat.shape[0]
    f = np.zeros_like(t_mat)
    np.fill_diagonal(f, fvals)
    d = np.diagonal(t_mat)
    for j in range(1, m):
        rhs = f[:j, :j] @ t_mat[:j, j] - t_mat[:j, j] * fvals[j]
        sys = t_mat[:j, :j] - d[j] * np.eye(j)
        f[:j, j] = scipy.linalg.solve_triangular(sys, rhs)
    return f


def _separate_diagonal(d, ctol):
    """Perturb clustered entries so all pairwise separations exceed ctol."""
    d = d.copy()
    order = np.argsort(d.real)
    for a, b in zip(order[:-1], order[1:]):
        if abs(d[b] - d[a]) < ctol:
            d[b] = d[a] + ctol * (1.0 + abs(d[a])) * (1.0 + 0.0j)
    return d


def parlett_fun_triangular(t_mat, kind: ScalarFunKind, scale: float = 1.0,
                           ctol: float = PARLETT_CLUSTER_TOL, quiet: bool = False):
    """Evaluate f(scale*T) for upper-triangular complex T via Parlett recurrence.

    Returns ``(F, perturbed)``.  Adjacent confluent diagonal pairs use the
    2x2 Sylvester-block (divided difference) formula; non-adjacent clusters
    fall back to a tolerance-perturbed diagonal with a warning.
    """
    fun, dfun = _FUNS[kind]
    t_scaled = np.asarray(t_mat, dtype=complex) * scale
    m = t_scaled.shape[0]
    d = np.diagonal(t_scaled).copy()
    if m == 1:
        return np.array([[fun(d[0])]], dtype=complex), False

    sep = np.abs(d[:, None] - d[None, :])
    iu, ju = np.triu_indices(m, k=1)
    close = sep[iu, ju] < ctol
    nonadjacent_cluster = np.any(close & (ju - iu > 1))
    perturbed = False
    if nonadjacent_cluster:
        d = _separate_diagonal(d, ctol)
        t_scaled = t_scaled.copy()
        np.fill_diagonal(t_scaled, d)
        perturbed = True
        if not quiet:
            warnings.warn(
                "clustered triangular diagonal perturbed for matrix function",
                ParlettPerturbationWarning,
                stacklevel=2,
            )
    fvals = fun(d)

    if not np.any(close) or nonadjacent_cluster:
        return _parlett_columnwise(t_scaled, fvals), perturbed

    # Scalar recurrence with divided-difference handling of adjacent pairs.
    f = np.zeros_like(t_scaled)
    np.fill_diagonal(f, fvals)
    for off in range(1, m):
        for i in range(m - off):
            j = i + off
            num = t_scaled[i, j] * (fvals[i] - fvals[j])
            if off > 1:
                num += f[i, i + 1:j] @ t_scaled[i + 1:j, j]
                num -= t_scaled[i, i + 1:j] @ f[i + 1:j, j]
            den = d[i] - d[j]
            if abs(den) >= ctol:
                f[i, j] = num / den
            elif off == 1:
                f[i, j] = t_scaled[i, j] * dfun((d[i] + d[j]) / 2.0)
            else:
                # Distant confluent pair that escaped the cluster scan.
                f[i, j] = num / (ctol * (1.0 + abs(d[i])))
                perturbed = True
    return f, perturbed


class SpectralCache:
    """Reusable factorization of a small matrix H plus the starting scale beta.

    Symmetric H is stored as an eigendecomposition Q diag(lam) Q^T, general H
    as a complex Schur form Q T Q^H.  One factorization serves many
    evaluation times, which is what the residual-curve sampling needs.
    """

    def __init__(self, *, lam=None, q=None, t_mat=None, beta=1.0):
        self.lam = lam
        self.q = q
        self.t_mat = t_mat
        self.beta = float(beta)
        self.symmetric = t_mat is None
        self.perturbed = False
        self.m = (q.shape[0] if q is not None else 0)
        if self.symmetric:
            # Weights for fast e_m^T f(scale H) e_1 sampling.
            self._w_first = self.q[0, :]
            self._w_corner = self.q[-1, :] * self.q[0, :]
        else:
            self._qh_e1 = self.q[0, :].conj()

    @classmethod
    def from_tridiagonal(cls, diag, offdiag, beta=1.0):
        diag = np.asarray(diag, dtype=float)
        offdiag = np.asarray(offdiag, dtype=float)
        if diag.size == 1:
            lam, q = diag.copy(), np.ones((1, 1))
        else:
            lam, q = scipy.linalg.eigh_tridiagonal(diag, offdiag)
        return cls(lam=lam, q=q, beta=beta)

    @classmethod
    def from_dense(cls, h_mat, beta=1.0, symmetric=None):
        h_mat = np.asarray(h_mat, dtype=float)
        if symmetric is None:
            scale = np.linalg.norm(h_mat, np.inf) or 1.0
            symmetric = bool(np.all(np.abs(h_mat - h_mat.T) <= 1e-13 * scale))
        if symmetric:
            lam, q = np.linalg.eigh(h_mat)
            return cls(lam=lam, q=q, beta=beta)
        t_mat, q = scipy.linalg.schur(h_mat, output="complex")
        return cls(t_mat=t_mat, q=q, beta=beta)

    def _fun_of_h(self, kind, scale):
        # warn once per cache; later evaluations reuse the same clustering
        f, perturbed = parlett_fun_triangular(self.t_mat, kind, scale,
                                              quiet=self.perturbed)
        if perturbed:
            self.perturbed = True
        return f

    def apply_fun(self, kind: ScalarFunKind, scale: float, b):
        """f(scale*H) @ b."""
        b = np.asarray(b)
        if self.symmetric:
            return self.q @ (scalar_fun(kind, scale * self.lam) * (self.q.T @ b))
        out = self.q @ (self._fun_of_h(kind, scale) @ (self.q.conj().T @ b))
        return out.real if not np.iscomplexobj(b) else out

    def fun_e1(self, kind: ScalarFunKind, scale: float):
        """f(scale*H) @ (beta e_1)."""
        if self.symmetric:
            return self.beta * (
                self.q @ (scalar_fun(kind, scale * self.lam) * self._w_first)
            )
        out = self.q @ (self._fun_of_h(kind, scale) @ self._qh_e1)
        return self.beta * out.real

    def corner_fun_e1(self, kind: ScalarFunKind, scales) -> np.ndarray:
        """e_m^T f(scale*H) (beta e_1) for an array of scales."""
        scales = np.atleast_1d(np.asarray(scales, dtype=float))
        if self.symmetric:
            vals = scalar_fun(kind, np.outer(scales, self.lam))
            return self.beta * (np.atleast_2d(vals) @ self._w_corner)
        out = np.empty(scales.size)
        for i, s in enumerate(scales):
            f = self._fun_of_h(kind, s)
            out[i] = self.beta * (self.q[-1, :] @ (f @ self._qh_e1)).real
        return out


def matfun_action(h_mat, kind: ScalarFunKind, scale: float, b,
                  cache: SpectralCache | None = None, symmetric=None):
    """f(scale*H) @ b for a small matrix H, where f is the selected function.

    The symmetric path diagonalizes, the general path uses the Schur form
    with the Parlett recurrence (Pade-guarded on the triangular diagonal).
    """
    if cache is None:
        cache = SpectralCache.from_dense(h_mat, beta=1.0, symmetric=symmetric)
    return cache.apply_fun(kind, scale, b)


_PROJECTED_SOLUTION = {
    ScalarFunKind.PSI: lambda cache, t: 0.5 * t * t * cache.fun_e1(ScalarFunKind.PSI, t * t),
    ScalarFunKind.SIGMA: lambda cache, t: t * cache.fun_e1(ScalarFunKind.SIGMA, t * t),
    ScalarFunKind.PHI: lambda cache, t: t * cache.fun_e1(ScalarFunKind.PHI, -t),
}

_PROJECTED_VELOCITY = {
    ScalarFunKind.PSI: lambda cache, t: t * cache.fun_e1(ScalarFunKind.SIGMA, t * t),
    ScalarFunKind.SIGMA: lambda cache, t: cache.fun_e1(ScalarFunKind.COS, t * t),
}


def projected_solution(h_mat, kind: ScalarFunKind, beta: float, t: float,
                       cache: SpectralCache | None = None):
    """Solution u(t) of the projected IVP for the selected function kind.

    PSI:   u'' = -H u + beta e1, u(0) = u'(0) = 0      ->  u(t) = t^2/2 psi(t^2 H) beta e1
    SIGMA: u'' = -H u, u(0) = 0, u'(0) = beta e1       ->  u(t) = t sigma(t^2 H) beta e1
    PHI:   u'  = -H u + beta e1, u(0) = 0              ->  u(t) = t phi(-t H) beta e1
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if kind not in _PROJECTED_SOLUTION:
        raise ValueError(f"no projected IVP for kind {kind}")
    if cache is None:
        cache = SpectralCache.from_dense(h_mat, beta=beta)
    return _PROJECTED_SOLUTION[kind](cache, t)


def projected_velocity(h_mat, kind: ScalarFunKind, beta: float, t: float,
                       cache: SpectralCache | None = None):
    """u'(t) for the second-order projected IVPs (PSI and SIGMA kinds)."""
    if kind not in _PROJECTED_VELOCITY:
        raise ValueError(f"no velocity formula for kind {kind}")
    if cache is None:
        cache = SpectralCache.from_dense(h_mat, beta=beta)
    return _PROJECTED_VELOCITY[kind](cache, t)


def exact_ivp_solution(ivp, t: float, cap: int = 4096):
    """Ground-truth (y(t), y'(t)) of y'' = -A y + g via dense factorization.

        y(t)  = u + t^2/2 psi(t^2 A)(g - A u) + t sigma(t^2 A) v
        y'(t) = t sigma(t^2 A)(g - A u) + cos(t sqrt(A)) v
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    a_mat = linop.assemble_dense(ivp.op, cap=cap)
    w = ivp.g - a_mat @ ivp.u
    cache = SpectralCache.from_dense(
        a_mat, beta=1.0, symmetric=ivp.op.is_symmetric or None
    )
    t2 = t * t
    y = ivp.u + 0.5 * t2 * cache.apply_fun(ScalarFunKind.PSI, t2, w)
    y = y + t * cache.apply_fun(ScalarFunKind.SIGMA, t2, ivp.v)
    yp = t * cache.apply_fun(ScalarFunKind.SIGMA, t2, w)
    yp = yp + cache.apply_fun(ScalarFunKind.COS, t2, ivp.v)
    return y, yp
