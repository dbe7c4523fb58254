"""Perturbed weights ``phi0 + phi1``: Neumann-series kernel versus the direct projector.

All kernels live in the span of ``E_k = e^{-t phi0} e_k`` (orthonormal basis for
``phi0``).  A function ``e^{t phi1} E c_plus + e^{-t phi1} E c_minus`` is stored
as its coefficient pair, so ``B~``, ``B~*`` and ``R = B~ - B~*`` act through the
moment matrices ``M_c = int E^* e^{c t phi1} E`` for ``c = 2, 0, -2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from ftkl.errors import AccuracyError, ConfigurationError
from ftkl.fock.kernel import FockBasis, fock_basis
from ftkl.fock.weights import HomogeneousWeight, Perturbation

CHUNK = 1 << 15


def default_cutoff_radius(t: float, r: int) -> float:
    return 3.0 * t ** (-1.0 / r)


def cubic_perturbation(eps: float, t: float, r: int, cutoff_radius: float | None = None) -> Perturbation:
    """``eps * p1**3`` cut off at ``R0`` (default ``3 t^{-1/r}``)."""
    R0 = default_cutoff_radius(t, r) if cutoff_radius is None else cutoff_radius
    return Perturbation({(3, 0): float(eps)}, float(R0))


def probe_grid(t: float, r: int, n: int = 3) -> np.ndarray:
    """``n x n`` grid with ``|p_i| <= 0.5 t^{-1/r}``."""
    s = 0.5 * t ** (-1.0 / r)
    x = np.linspace(-s, s, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _weighted_moments(basis: FockBasis, phi1: Perturbation, Q: np.ndarray, wq: np.ndarray, cs) -> dict:
    """``int E^* (e^{c t phi1} - 1) E`` for each ``c``, accumulated in chunks."""
    n = basis.nmax + 1
    out = {c: np.zeros((n, n), dtype=complex) for c in cs}
    keep = wq != 0
    Q, wq = Q[keep], wq[keep]
    for a in range(0, len(Q), CHUNK):
        q = Q[a:a + CHUNK]
        E = basis.sections(q[:, 0], q[:, 1])
        f1 = phi1(q[:, 0], q[:, 1])
        for c in cs:
            w = wq[a:a + CHUNK] * np.expm1(c * basis.t * f1)
            out[c] += (E.conj() * w[:, None]).T @ E
    return out


def box_moments(basis: FockBasis, phi1: Perturbation, n_nodes: int) -> dict:
    """Tensor trapezoid over ``[-R0, R0]^2``; the integrand vanishes on the boundary."""
    R0 = phi1.cutoff_radius
    x = np.linspace(-R0, R0, n_nodes + 1)
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")
    Q = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.hypot(Q[:, 0], Q[:, 1]) < R0
    wq = np.where(inside, h * h, 0.0)
    m = _weighted_moments(basis, phi1, Q, wq, (2, -2))
    eye = np.eye(basis.nmax + 1)
    return {2: eye + m[2], 0: eye.astype(complex), -2: eye + m[-2]}


def polar_full_gram(basis: FockBasis, phi1: Perturbation, n_r: int, n_theta: int) -> np.ndarray:
    """``int E^* e^{-2 t phi1} E`` by Gauss-Legendre in radius and trapezoid in angle."""
    R0 = phi1.cutoff_radius
    x, wx = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * R0 * (x + 1)
    wr = 0.5 * R0 * wx * rho
    th = 2 * pi * np.arange(n_theta) / n_theta
    Rg, Tg = np.meshgrid(rho, th, indexing="ij")
    Q = np.column_stack([(Rg * np.cos(Tg)).ravel(), (Rg * np.sin(Tg)).ravel()])
    wq = (wr[:, None] * np.full(n_theta, 2 * pi / n_theta)[None, :]).ravel()
    m = _weighted_moments(basis, phi1, Q, wq, (-2,))
    return np.eye(basis.nmax + 1) + m[-2]


def _converge(fn, start, grow, tol, cap, label):
    n = start
    prev = fn(n)
    history = []
    while True:
        n2 = grow(n)
        cur = fn(n2)
        err = max(float(np.abs(cur[k] - prev[k]).max()) for k in cur) if isinstance(cur, dict) \
            else float(np.abs(cur - prev).max())
        history.append((n2, err))
        if err < tol:
            return cur, err, n2, history
        if n2 >= cap:
            raise AccuracyError(f"{label} quadrature did not converge under doubling", history=history)
        n, prev = n2, cur


@dataclass
class NeumannResult:
    basis: FockBasis
    weight: HomogeneousWeight
    t: float
    N: int
    moments: dict
    full_gram: np.ndarray
    defects: dict
    anti_hermitian: float
    anti_hermitian_matrix: float
    err_est: float
    diagnostics: dict = field(default_factory=dict)

    def _split(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        E = self.basis.sections(P[:, 0], P[:, 1])
        f1 = self.weight.phi1(P[:, 0], P[:, 1])
        return E, np.exp(self.t * f1), np.exp(-self.t * f1)

    def _seed(self, Q):
        # columns: B~*(., q) = e^{t phi1} E conj(E(q)) e^{-t phi1(q)}
        EQ, _, em = self._split(Q)
        return (EQ.conj() * em[:, None]).T, np.zeros((EQ.shape[1], EQ.shape[0]), dtype=complex)

    def apply_R(self, cp, cm):
        M2, M0, Mm2 = self.moments[2], self.moments[0], self.moments[-2]
        return -(M0 @ cp + Mm2 @ cm), M2 @ cp + M0 @ cm

    def _evaluate(self, P, cp, cm):
        EP, ep, em = self._split(P)
        return (EP * ep[:, None]) @ cp + (EP * em[:, None]) @ cm

    def corrected(self, P, Q, N: int | None = None) -> np.ndarray:
        """``sum_{j<N} R^j B~*`` evaluated at ``(P_i, Q_j)``."""
        N = self.N if N is None else N
        cp, cm = self._seed(Q)
        sp, sm = cp.copy(), cm.copy()
        for _ in range(N - 1):
            cp, cm = self.apply_R(cp, cm)
            sp, sm = sp + cp, sm + cm
        return self._evaluate(P, sp, sm)

    def direct(self, P, Q) -> np.ndarray:
        EP, _, emP = self._split(P)
        EQ, _, emQ = self._split(Q)
        X = np.linalg.solve(self.full_gram, (EQ * emQ[:, None]).conj().T)
        return (EP * emP[:, None]) @ X

    def btilde(self, P, Q) -> np.ndarray:
        EP, _, emP = self._split(P)
        EQ, epQ, _ = self._split(Q)
        return (EP * emP[:, None]) @ (EQ * epQ[:, None]).conj().T

    def R(self, P, Q) -> np.ndarray:
        return self.btilde(P, Q) - self.btilde(Q, P).conj().T


def neumann_corrected_kernel(
    weight: HomogeneousWeight,
    t: float,
    N: int = 3,
    nmax: int = 40,
    grid=None,
    tol: float = 1e-12,
    box_nodes: int = 64,
    box_cap: int = 1024,
    polar_nodes: tuple = (64, 64),
) -> NeumannResult:
    """Neumann-corrected kernel with defects ``delta_1..delta_N`` against the direct kernel."""
    if N < 1:
        raise ConfigurationError("N must be >= 1", N=N)
    if weight.phi1 is None:
        raise ConfigurationError("weight has no perturbation phi1")
    r = weight.r
    R0 = weight.phi1.cutoff_radius
    if not R0 > 0 or R0 < t ** (-1.0 / r):
        raise ConfigurationError(
            "cutoff radius too small to contain the quadrature mass",
            cutoff_radius=R0, minimum=t ** (-1.0 / r),
        )
    w0 = weight.without_perturbation()
    basis = fock_basis(w0, t, nmax)
    phi1 = weight.phi1
    grid = probe_grid(t, r) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))

    moments, box_err, n_box, box_hist = _converge(
        lambda n: box_moments(basis, phi1, n), box_nodes, lambda n: 2 * n, tol, box_cap, "box"
    )
    nr0, nt0 = polar_nodes
    H, pol_err, n_pol, pol_hist = _converge(
        lambda n: polar_full_gram(basis, phi1, n, max(nt0, 2 * n)),
        nr0, lambda n: 2 * n, tol, 16 * nr0, "polar",
    )

    res = NeumannResult(basis, weight, float(t), N, moments, H, {}, 0.0, 0.0, 0.0)
    direct = res.direct(grid, grid)
    scale = float(np.abs(direct).max())
    for n in range(1, N + 1):
        res.defects[n] = float(np.abs(res.corrected(grid, grid, n) - direct).max())

    Rg = res.R(grid, grid)
    res.anti_hermitian = float(np.abs(Rg + Rg.conj().T).max())
    M2, M0, Mm2 = moments[2], moments[0], moments[-2]
    gram = np.block([[M2, M0], [M0, Mm2]])
    Rmat = np.block([[-M0, -Mm2], [M2, M0]])
    GR = gram @ Rmat
    res.anti_hermitian_matrix = float(np.abs(GR + GR.conj().T).max())

    cond = float(np.linalg.cond(H))
    res.err_est = (box_err + pol_err) * cond * scale + 64 * np.finfo(float).eps * scale * cond
    res.diagnostics = {
        "nmax": nmax,
        "cutoff_radius": R0,
        "box_nodes": n_box,
        "box_err": box_err,
        "polar_nodes": n_pol,
        "polar_err": pol_err,
        "full_gram_condition": cond,
        "R_norm": float(np.abs(np.linalg.eigvals(Rmat)).max()),
        "kernel_scale": scale,
        "history": {"box": box_hist, "polar": pol_hist},
    }
    return res
