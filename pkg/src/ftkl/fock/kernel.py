"""Weighted Fock-space kernels ``B_t(p, p') = e^{-t phi(p)} K_t(z, z') e^{-t phi(p')}``.

The Gram matrix of the monomials ``z^n`` against ``e^{-2 t phi0}`` factors in
polar coordinates: the radial integral is an exact Gamma value and only the
angular integral ``int e^{i(m-n) theta} g(theta)^{-(m+n+2)/r} dtheta`` needs
quadrature (trapezoid, node count doubled until stable).  Everything is kept in
diagonally normalized form ``G = D S D`` with ``log D`` stored, so ``t`` enters
only through ``D`` and large degrees never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, lgamma, log, pi

import numpy as np
from scipy.linalg import solve_triangular

from ftkl.errors import (
    AccuracyError,
    ConfigurationError,
    DegenerateBasisError,
    UnsupportedWeightError,
)
from ftkl.fock.weights import HomogeneousWeight

PIVOT_TOL = 1e-10
QUAD_TOL = 1e-13
TRUNC_WARN = 1e-8
DEFAULT_NMAX = 48


def radial_norms(r: int, t: float, nmax: int, weight: HomogeneousWeight | None = None) -> np.ndarray:
    """``||z^n||^2`` in ``L^2(e^{-2t|z|^r})`` for ``n = 0..nmax``, in closed form."""
    if weight is not None and not weight.radial:
        raise UnsupportedWeightError("radial_norms needs a radial weight", weight=weight.label)
    n = np.arange(nmax + 1)
    s = (2 * n + 2) / r
    logs = np.log(2 * pi / r) - s * np.log(2 * t) + np.array([lgamma(x) for x in s])
    return np.exp(logs)


def model_constant_closed_form(r: int) -> float:
    """``B_1(0, 0)`` for the radial weight ``|z|^r``: ``r 2^{2/r} / (2 pi Gamma(2/r))``."""
    return r * 2 ** (2 / r) / (2 * pi * gamma(2 / r))


@dataclass
class Gram:
    """Normalized Gram data: ``G[m, n] = exp(logD[m] + logD[n]) * S[m, n]``."""

    r: int
    t: float
    nmax: int
    S: np.ndarray
    log_scale: np.ndarray
    err_est: float
    n_theta: int | None

    def dense(self) -> np.ndarray:
        D = np.exp(self.log_scale)
        return D[:, None] * self.S * D[None, :]


def _log_radial_factor(k: np.ndarray, r: int, t: float) -> np.ndarray:
    # int_0^inf rho^{k+1} e^{-2 t g rho^r} drho = Gamma((k+2)/r) / (r (2 t g)^{(k+2)/r})
    s = (k + 2) / r
    return np.array([lgamma(x) for x in s]) - log(r) - s * log(2 * t)


def _angular_moments(weight: HomogeneousWeight, nmax: int, n_theta: int):
    """``J[k, d] = e^{c_k} * Jhat[k, d]`` for ``k <= 2 nmax``, frequency ``d`` mod ``n_theta``."""
    theta = 2 * pi * np.arange(n_theta) / n_theta
    lg = np.log(weight.angular_profile(theta))
    k = np.arange(2 * nmax + 1)
    expo = -((k[:, None] + 2) / weight.r) * lg[None, :]
    c = expo.max(axis=1)
    h = np.exp(expo - c[:, None])
    Jhat = 2 * pi * np.fft.ifft(h, axis=1)
    return c, Jhat


def _assemble(weight, t, nmax, c, Jhat):
    n = np.arange(nmax + 1)
    k = np.arange(2 * nmax + 1)
    L = _log_radial_factor(k, weight.r, t) + c
    m_idx, n_idx = np.meshgrid(n, n, indexing="ij")
    ksum = m_idx + n_idx
    d = (m_idx - n_idx) % Jhat.shape[1]
    J = Jhat[ksum, d]
    Jdiag = Jhat[2 * n, 0].real
    if np.any(Jdiag <= 0):
        raise AccuracyError("nonpositive diagonal angular moment", degrees=n[Jdiag <= 0].tolist())
    logD = 0.5 * (L[2 * n] + np.log(Jdiag))
    logS = L[ksum] - 0.5 * (L[2 * m_idx] + L[2 * n_idx])
    S = np.exp(logS) * J / np.sqrt(Jdiag[m_idx] * Jdiag[n_idx])
    S = 0.5 * (S + S.conj().T)
    return S, logD


def gram_matrix(
    weight: HomogeneousWeight,
    t: float,
    nmax: int,
    tol: float = QUAD_TOL,
    n_theta: int | None = None,
    max_theta: int = 2**16,
) -> Gram:
    """Gram matrix of ``1, z, ..., z^nmax`` in ``L^2(e^{-2 t phi0})``."""
    if t <= 0:
        raise ValueError("t must be positive")
    weight.check_gram_route()
    if weight.coeffs is None:
        # radial without polynomial form: angular moments are exactly 2 pi delta
        n = np.arange(nmax + 1)
        logD = 0.5 * (_log_radial_factor(2 * n, weight.r, t) + log(2 * pi))
        return Gram(weight.r, t, nmax, np.eye(nmax + 1, dtype=complex), logD, 0.0, None)
    N = n_theta or max(64, 1 << int(np.ceil(np.log2(4 * (nmax + 1)))))
    c, Jh = _angular_moments(weight, nmax, N)
    S, logD = _assemble(weight, t, nmax, c, Jh)
    history = []
    while True:
        c2, Jh2 = _angular_moments(weight, nmax, 2 * N)
        S2, logD2 = _assemble(weight, t, nmax, c2, Jh2)
        err = float(max(np.abs(S2 - S).max(), np.abs(logD2 - logD).max()))
        history.append((N, err))
        N *= 2
        S, logD = S2, logD2
        if err < tol:
            break
        if 2 * N > max_theta:
            raise AccuracyError(
                "angular quadrature did not converge under node doubling", history=history
            )
    return Gram(weight.r, t, nmax, S, logD, max(err, np.finfo(float).eps * (nmax + 1)), N)


def _cholesky_with_degree(S: np.ndarray, pivot_tol: float) -> np.ndarray:
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        L = None
    if L is not None:
        piv = np.abs(np.diag(L)) ** 2
        bad = np.nonzero(piv < pivot_tol)[0]
        if bad.size == 0:
            return L
        k = int(bad[0])
    else:
        k = S.shape[0] - 1
        for j in range(1, S.shape[0] + 1):
            try:
                Lj = np.linalg.cholesky(S[:j, :j])
                if abs(Lj[-1, -1]) ** 2 < pivot_tol:
                    k = j - 1
                    break
            except np.linalg.LinAlgError:
                k = j - 1
                break
    raise DegenerateBasisError(f"Cholesky pivot below threshold at degree {k}", degree=k)


@dataclass
class FockBasis:
    """Orthonormal basis ``e_k = sum_n transform[k, n] z^n`` of ``A^2(e^{-2 t phi0})``."""

    t: float
    nmax: int
    r: int
    chol: np.ndarray
    log_scale: np.ndarray
    weight: HomogeneousWeight | None = None
    quad: dict = field(default_factory=dict)
    err_est: float = 0.0

    @property
    def transform(self) -> np.ndarray:
        Linv = solve_triangular(self.chol, np.eye(self.nmax + 1), lower=True)
        return Linv * np.exp(-self.log_scale)[None, :]

    @property
    def norms(self) -> np.ndarray:
        return np.exp(2 * self.log_scale)

    def orthonormality_defect(self, S: np.ndarray | None = None) -> float:
        """``max |T G T^* - I|`` computed in normalized form."""
        if S is None:
            S = self.chol @ self.chol.conj().T
        Linv = solve_triangular(self.chol, np.eye(self.nmax + 1), lower=True)
        return float(np.abs(Linv @ S @ Linv.conj().T - np.eye(self.nmax + 1)).max())

    def sections(self, p1, p2, phi=None) -> np.ndarray:
        """``e^{-t phi(p)} e_k(z)`` for points ``p``; shape ``(npts, nmax+1)``.

        ``phi`` defaults to ``phi0`` of the attached weight.
        """
        p1 = np.atleast_1d(np.asarray(p1, dtype=float)).ravel()
        p2 = np.atleast_1d(np.asarray(p2, dtype=float)).ravel()
        if phi is None:
            phi = self.weight.phi0(p1, p2) if self.weight is not None else np.hypot(p1, p2) ** self.r
        rho = np.hypot(p1, p2)
        th = np.arctan2(p2, p1)
        n = np.arange(self.nmax + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(rho)
            logmag = n[None, :] * lr[:, None] - self.log_scale[None, :] - self.t * phi[:, None]
        logmag[:, 0] = -self.log_scale[0] - self.t * phi
        u = np.exp(logmag) * np.exp(1j * n[None, :] * th[:, None])
        u[rho == 0, 1:] = 0.0
        return solve_triangular(self.chol, u.T, lower=True).T

    def kernel(self, P, Q) -> np.ndarray:
        """Matrix ``B_t(P_i, Q_j)`` for point arrays of shape ``(n, 2)``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        EP = self.sections(P[:, 0], P[:, 1])
        EQ = self.sections(Q[:, 0], Q[:, 1])
        return EP @ EQ.conj().T

    def truncation_estimate(self, P, Q) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        EP = np.abs(self.sections(P[:, 0], P[:, 1])[:, -2:])
        EQ = np.abs(self.sections(Q[:, 0], Q[:, 1])[:, -2:])
        return 2.0 * (EP @ EQ.T)


def orthonormalize(G, pivot_tol: float = PIVOT_TOL, weight: HomogeneousWeight | None = None) -> FockBasis:
    """Cholesky-based orthonormalization of a Gram matrix (plain array or :class:`Gram`)."""
    if isinstance(G, Gram):
        S, logD, t, r, nmax = G.S, G.log_scale, G.t, G.r, G.nmax
        quad = {"n_theta": G.n_theta, "quad_err": G.err_est}
        err = G.err_est
    else:
        G = np.asarray(G)
        diag = np.real(np.diag(G))
        if np.any(diag <= 0):
            raise DegenerateBasisError(
                "nonpositive Gram diagonal", degree=int(np.nonzero(diag <= 0)[0][0])
            )
        logD = 0.5 * np.log(diag)
        D = np.exp(logD)
        S = G / np.outer(D, D)
        t, r, nmax = float("nan"), 0, G.shape[0] - 1
        quad, err = {}, 0.0
    L = _cholesky_with_degree(S, pivot_tol)
    basis = FockBasis(t=t, nmax=nmax, r=r, chol=L, log_scale=logD, weight=weight, quad=quad)
    defect = basis.orthonormality_defect(S)
    cond = float(np.linalg.cond(S))
    basis.quad["orthonormality_defect"] = defect
    basis.quad["condition"] = cond
    basis.err_est = err * cond + defect
    return basis


def fock_basis(weight: HomogeneousWeight, t: float, nmax: int, **kw) -> FockBasis:
    return orthonormalize(gram_matrix(weight, t, nmax, **kw), weight=weight)


@dataclass(frozen=True)
class KernelValue:
    value: complex
    err_est: float
    warning: str | None = None


def bergman_eval(basis: FockBasis, weight: HomogeneousWeight | None, t: float | None, p, q) -> KernelValue:
    """``B_t(p, q)`` with quadrature and truncation error estimate.

    ``weight`` and ``t`` may be ``None``; when given they must match the basis.
    """
    if t is not None and not np.isclose(t, basis.t, rtol=1e-14, atol=0):
        raise ConfigurationError("basis was built for a different t", basis_t=basis.t, t=t)
    if weight is not None and basis.weight is not None and weight.without_perturbation() != basis.weight.without_perturbation():
        raise ConfigurationError("basis was built for a different weight")
    P = np.asarray(p, dtype=float).reshape(1, 2)
    Q = np.asarray(q, dtype=float).reshape(1, 2)
    val = complex(basis.kernel(P, Q)[0, 0])
    trunc = float(basis.truncation_estimate(P, Q)[0, 0])
    err = abs(val) * basis.err_est + trunc
    warn = None
    if trunc > TRUNC_WARN * max(abs(val), 1e-300):
        warn = "evaluation beyond truncation-reliable radius; increase nmax"
    return KernelValue(val, err, warn)


def select_nmax(
    weight: HomogeneousWeight,
    t: float,
    radius: float,
    tol: float = 1e-10,
    start: int = 16,
    step: int = 8,
    cap: int = 240,
) -> int:
    """Smallest tested ``nmax`` for which ``B_t(0,0)`` and ``B_t`` at the grid corner settle."""
    corner = np.array([[radius, radius]])
    origin = np.zeros((1, 2))

    def probe(n):
        try:
            b = fock_basis(weight, t, n)
        except DegenerateBasisError as exc:
            raise AccuracyError(
                "monomial Gram matrix degenerates before the kernel settles",
                nmax=n, degree=exc.diagnostics.get("degree"), radius=radius, t=t,
            ) from exc
        return np.array([b.kernel(origin, origin)[0, 0].real, b.kernel(corner, corner)[0, 0].real])

    prev = probe(start)
    n = start
    while n + step <= cap:
        cur = probe(n + step)
        if np.all(np.abs(cur - prev) <= tol * np.abs(cur)):
            return n + step
        prev, n = cur, n + step
    raise AccuracyError("nmax did not settle below cap", cap=cap, radius=radius, t=t)


def model_constant_c0(weight: HomogeneousWeight, nmax: int | None = None) -> float:
    """``B_1(0, 0)`` by the Gram route."""
    w0 = weight.without_perturbation() if weight.phi1 is not None else weight
    if nmax is None:
        nmax = 0 if w0.radial else select_nmax(w0, 1.0, 0.0, tol=1e-11)
    b = fock_basis(w0, 1.0, nmax)
    return float(b.kernel(np.zeros((1, 2)), np.zeros((1, 2)))[0, 0].real)


def polar_grid(radius: float, n_r: int = 3, n_theta: int = 8) -> np.ndarray:
    """Sample points: origin plus rings up to ``radius``."""
    pts = [(0.0, 0.0)]
    for i in range(1, n_r + 1):
        rho = radius * i / n_r
        for j in range(n_theta):
            th = 2 * pi * (j + 0.5 * (i % 2)) / n_theta
            pts.append((rho * np.cos(th), rho * np.sin(th)))
    return np.array(pts)


@dataclass
class ScalingReport:
    deviation: float
    err_est: float
    per_t: dict


def scaling_deviation(
    weight: HomogeneousWeight,
    t_list,
    grid=None,
    nmax: int | None = None,
) -> ScalingReport:
    """``max |t^{-2/r} B_t(t^{-1/r} p, t^{-1/r} q) - B_1(p, q)|`` over the grid pairs."""
    if weight.phi1 is not None and not weight.phi1.is_zero():
        raise UnsupportedWeightError("scaling law applies to purely homogeneous weights")
    r = weight.r
    grid = polar_grid(1.0) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    radius = float(np.abs(grid).max()) if grid.size else 0.0
    if nmax is None:
        nmax = DEFAULT_NMAX
    b1 = fock_basis(weight, 1.0, nmax)
    ref = b1.kernel(grid, grid)
    per_t, dev, err = {}, 0.0, 0.0
    for t in t_list:
        bt = fock_basis(weight, float(t), nmax)
        s = float(t) ** (-1.0 / r)
        val = float(t) ** (-2.0 / r) * bt.kernel(s * grid, s * grid)
        d = float(np.abs(val - ref).max())
        per_t[float(t)] = d
        dev = max(dev, d)
        # both sides share the same truncation, so only quadrature/orthonormality errors enter
        err = max(err, (bt.err_est + b1.err_est) * float(np.abs(ref).max()))
    return ScalingReport(dev, err, per_t)


def reproducing_defect(basis: FockBasis, points, k: int, n_r: int = 200, n_theta: int = 256) -> float:
    """``max_p |int B(p, q) E_k(q) dq - E_k(p)|`` by polar Gauss-Legendre x trapezoid quadrature."""
    w = basis.weight
    gmin = w.ellipticity if w is not None and w.coeffs is not None else 1.0
    # e^{-2 t g rho^r} < 1e-40 beyond rho_max
    rho_max = (92.0 / (2 * basis.t * gmin)) ** (1.0 / basis.r)
    x, wx = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * rho_max * (x + 1)
    wr = 0.5 * rho_max * wx * rho
    th = 2 * pi * np.arange(n_theta) / n_theta
    R, TH = np.meshgrid(rho, th, indexing="ij")
    Q = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    wq = (wr[:, None] * np.full(n_theta, 2 * pi / n_theta)[None, :]).ravel()
    P = np.atleast_2d(np.asarray(points, dtype=float))
    EQ = basis.sections(Q[:, 0], Q[:, 1])
    EP = basis.sections(P[:, 0], P[:, 1])
    Bpq = EP @ EQ.conj().T
    recon = Bpq @ (wq * EQ[:, k])
    return float(np.abs(recon - EP[:, k]).max())
