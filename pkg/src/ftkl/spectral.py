"""Spectral gap of the model Kodaira Laplacian for radial weights ``|z|^r``.

On ``u = f(rho) e^{i l theta}`` the operator ``dbar_t = d/dzbar + t phi_zbar`` acts
as ``(1/2) e^{i(l+1) theta} (f' - l f / rho + t phi' f)``, so the sector operator
has quadratic form ``(1/4) int |f' - l f/rho + t phi' f|^2 rho d rho``.

For ``l >= 0`` we substitute ``f = rho^l e^{-t phi} g``; the form becomes
``(1/4) int w |g'|^2`` against mass ``int w |g|^2`` with ``w = rho^{2l+1} e^{-2t phi}``,
and the holomorphic zero mode is ``g = const``.  For ``l < 0`` the plain flux
form with potential
``V = l^2/rho^2 + t^2 phi'^2 - t (phi'' + phi'/rho) - 2 l t phi'/rho`` is used.
Both are discretized on a cell-centred mesh (natural condition at 0, Dirichlet
at ``rho_max``) in units of ``t^{-1/r}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from ftkl.errors import AccuracyError, SectorRangeError

ZERO_THRESHOLD = 1e-6
MESH_TOL = 1e-3
EDGE_TOL = 0.01
DEFAULT_NMAX = 10
WEIGHT_DROP = 80.0


def _log_weight(r: int, t: float, ell: int):
    a = 2 * abs(ell) + 1
    peak = (a / (2.0 * t * r)) ** (1.0 / r)
    return (lambda x: a * np.log(x) - 2 * t * x**r), peak


@dataclass(frozen=True)
class Mesh:
    """``n`` cells per sector.

    The sector interval is where ``rho^{2|l|+1} e^{-2t phi}`` stays within
    ``e^{-drop}`` of its peak (``rho_max`` overrides the right end).  Cutting the
    negligible tails keeps the symmetrized matrix entries in a modest range.
    """

    n: int = 400
    rho_max: float | None = None
    drop: float = WEIGHT_DROP

    def extent(self, r: int, t: float, ell: int) -> float:
        if self.rho_max is not None:
            return self.rho_max
        logw, peak = _log_weight(r, t, ell)
        target = logw(peak) - self.drop
        hi = 2 * peak + 1
        while logw(hi) > target:
            hi *= 2
        return float(brentq(lambda x: logw(x) - target, peak, hi))

    def start(self, r: int, t: float, ell: int) -> float:
        if ell <= 0:
            return 0.0
        logw, peak = _log_weight(r, t, ell)
        target = logw(peak) - self.drop
        if logw(1e-300) > target:
            return 0.0
        return float(brentq(lambda x: logw(x) - target, 1e-300, peak))

    def refined(self) -> "Mesh":
        return Mesh(2 * self.n, self.rho_max, self.drop)


def sector_operator(r: int, t: float, ell: int, mesh: Mesh | None = None):
    """Symmetrized tridiagonal ``(diag, offdiag)`` and the node radii."""
    if r < 2 or t <= 0:
        raise ValueError("need r >= 2 and t > 0")
    mesh = mesh or Mesh()
    R = mesh.extent(r, t, ell)
    lo = mesh.start(r, t, ell)
    n = mesh.n
    h = (R - lo) / n
    rc = lo + (np.arange(1, n + 1) - 0.5) * h
    rf = lo + np.arange(1, n + 1) * h  # faces i+1/2; beyond the last one sits the Dirichlet node
    phi = lambda x: x**r  # noqa: E731
    dphi = lambda x: r * x ** (r - 1)  # noqa: E731

    if ell >= 0:
        logw = lambda x: (2 * ell + 1) * np.log(x) - 2 * t * phi(x)  # noqa: E731
        lwc = logw(rc)
        lwf = logw(rf)
        # diag_i = (w_{i-1/2} + w_{i+1/2}) / (4 h^2 w_i); no flux through the left end
        right = np.exp(lwf - lwc)
        left = np.concatenate([[0.0], np.exp(lwf[:-1] - lwc[1:])])
        diag = 0.25 * (left + right) / h**2
        off = -0.25 * np.exp(lwf[:-1] - 0.5 * (lwc[:-1] + lwc[1:])) / h**2
    else:
        d1 = dphi(rc)
        d2 = r * (r - 1) * rc ** (r - 2)
        V = ell**2 / rc**2 + (t * d1) ** 2 - t * (d2 + d1 / rc) - 2 * ell * t * d1 / rc
        right = rf / rc
        left = np.concatenate([[0.0], rf[:-1] / rc[1:]])
        diag = 0.25 * ((left + right) / h**2 + V)
        off = -0.25 * rf[:-1] / np.sqrt(rc[:-1] * rc[1:]) / h**2
    return diag, off, rc


def sector_spectrum(r: int, t: float, ell: int, mesh: Mesh | None = None, k: int = 3) -> np.ndarray:
    """Lowest ``k`` eigenvalues in sector ``ell``."""
    d, e, _ = sector_operator(r, t, ell, mesh)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))


def _lowest_positive(vals: np.ndarray, thr: float):
    pos = vals[vals > thr]
    return (float(pos[0]) if pos.size else np.inf), int(np.sum(vals <= thr))


@dataclass
class GapResult:
    value: float
    sector: int
    per_sector: dict
    zero_modes: dict
    mesh_shift: float
    threshold: float


def gap(
    r: int,
    t: float,
    L: int | None = None,
    mesh: Mesh | None = None,
    zero_threshold: float = ZERO_THRESHOLD,
    detail: bool = False,
):
    """Smallest eigenvalue above ``zero_threshold * t^{2/r}`` over sectors ``|l| <= L``."""
    L = 2 * DEFAULT_NMAX if L is None else L
    mesh = mesh or Mesh()
    thr = zero_threshold * t ** (2.0 / r)
    per, zeros = {}, {}
    for ell in range(-L, L + 1):
        lam, nz = _lowest_positive(sector_spectrum(r, t, ell, mesh), thr)
        per[ell], zeros[ell] = lam, nz
    bad = [ell for ell, nz in zeros.items() if ell < 0 and nz]
    if bad:
        raise AccuracyError("zero modes found in negative sectors", sectors=bad)
    for edge, inner in ((L, L - 1), (-L, -L + 1)):
        if L >= 1 and per[edge] < per[inner] * (1 - EDGE_TOL):
            raise SectorRangeError(
                "sector minimum still decreasing at the scan boundary", sector=edge, L=L,
                edge_value=per[edge], inner_value=per[inner],
            )
    best = min(per, key=lambda ell: (per[ell], abs(ell)))
    fine, _ = _lowest_positive(sector_spectrum(r, t, best, mesh.refined()), thr)
    shift = abs(fine - per[best]) / fine
    if shift > MESH_TOL:
        raise AccuracyError(
            "mesh too coarse: eigenvalue shifts under doubling", shift=shift, sector=best,
            mesh=mesh.n, refined=mesh.refined().n, tol=MESH_TOL,
        )
    res = GapResult(fine, best, per, zeros, shift, thr)
    return res if detail else fine


@dataclass
class SpectralGapResult:
    r: int
    t_list: list
    lambda_min_pos: list
    fitted_exponent: float | None
    c1_estimate: float | None
    grid: dict
    sector_range: tuple
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        rows = ["t,lambda_min_pos"]
        rows += [f"{float(t)!r},{float(lam)!r}" for t, lam in zip(self.t_list, self.lambda_min_pos)]
        return "\n".join(rows) + "\n"


def gap_scaling(
    r: int,
    t_list,
    L: int | None = None,
    mesh: Mesh | None = None,
    residual_tol: float = 1e-3,
) -> SpectralGapResult:
    """Gaps over ``t_list`` and the least-squares slope of ``log gap`` against ``log t``."""
    L = 2 * DEFAULT_NMAX if L is None else L
    mesh = mesh or Mesh()
    ts = [float(t) for t in t_list]
    lams, details = [], []
    for t in ts:
        g = gap(r, t, L, mesh, detail=True)
        lams.append(g.value)
        details.append({"t": t, "sector": g.sector, "mesh_shift": g.mesh_shift})
    diag: dict = {"per_t": details}
    slope = c1 = None
    if len(set(ts)) >= 2:
        x, y = np.log(ts), np.log(lams)
        A = np.column_stack([x, np.ones_like(x)])
        (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = float(np.abs(A @ np.array([slope, icpt]) - y).max())
        slope, c1 = float(slope), float(np.exp(icpt))
        diag["residual"] = resid
        diag["residual_ok"] = resid <= residual_tol
        diag["decades"] = float(np.log10(max(ts) / min(ts)))
    else:
        diag["note"] = "fewer than two distinct t values; exponent undefined"
    return SpectralGapResult(
        r, ts, lams, slope, c1, {"n": mesh.n, "rho_max": mesh.rho_max, "drop": mesh.drop},
        (-L, L), diag,
    )
