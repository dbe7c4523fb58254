"""Circle-invariant Szegő modes as Bergman densities of weighted polynomial spaces.

On the affine chart of the sphere with potential ``psi = F(|w|^2)``, the
``m``-th mode is the Bergman density of polynomials in ``L^2(e^{-m psi} dA)``,
``dA`` the chart Lebesgue measure.  The default family ``F(u) = log(1 + u^s)``,
``s = r/2``, has curvature density ``(u F')' = s^2 u^{s-1} / (1 + u^s)^2``, which
vanishes to order ``r - 2`` at the origin, and exact Beta-function norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, gamma, lgamma, log, pi
from typing import Callable

import numpy as np

from ftkl.errors import AccuracyError, DomainError
from ftkl.fitter import estimate_leading_exponent

CONVENTION = "densities relative to chart Lebesgue measure dA on w = x + iy; weight e^{-m psi}"


@dataclass(frozen=True)
class BundleMetric:
    """``r`` (even or odd) and tensor power ``m``; ``F`` overrides the default family.

    A custom ``F`` must grow like ``growth * log u`` at infinity and be given
    with its curvature density ``curvature(u) = (u F'(u))'``.
    """

    r: int
    m: int
    F: Callable | None = None
    growth: float | None = None
    curvature: Callable | None = None

    def __post_init__(self):
        if self.r < 2 or self.m < 1:
            raise DomainError("need r >= 2 and m >= 1", r=self.r, m=self.m)
        if self.F is not None and (self.growth is None or self.curvature is None):
            raise DomainError("custom potentials need growth and curvature")

    @property
    def s(self) -> float:
        return self.r / 2

    @property
    def default_family(self) -> bool:
        return self.F is None

    def potential(self, u):
        u = np.asarray(u, dtype=float)
        return np.log1p(u**self.s) if self.F is None else self.F(u)

    def curvature_density(self, u):
        u = np.asarray(u, dtype=float)
        if self.F is not None:
            return self.curvature(u)
        s = self.s
        return s * s * u ** (s - 1) / (1 + u**s) ** 2

    def with_m(self, m: int) -> "BundleMetric":
        return BundleMetric(self.r, m, self.F, self.growth, self.curvature)

    @property
    def dimension(self) -> int:
        """``#{n : ||w^n|| < inf}``, i.e. ``n + 1 < m * growth``."""
        g = self.s if self.F is None else self.growth
        bound = self.m * g
        n = int(np.ceil(bound)) - 1
        return max(n, 0)


def _log_beta(a: float, b: float) -> float:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


def _log_norm_quadrature(metric: BundleMetric, n: int, tol: float = 1e-13) -> float:
    """``log(pi int_0^inf u^n e^{-m F(u)} du)`` by trapezoid in ``x = log u`` with doubling."""

    def integrand_log(x):
        return (n + 1) * x - metric.m * metric.potential(np.exp(x))

    lo, hi = -40.0, 40.0
    h = 0.25
    prev = None
    for _ in range(12):
        x = np.arange(lo, hi + h / 2, h)
        lg = integrand_log(x)
        top = lg.max()
        val = top + log(h * np.exp(lg - top).sum())
        if prev is not None and abs(val - prev) < tol:
            edge = max(lg[0], lg[-1]) - top
            if edge > log(tol):
                raise AccuracyError("quadrature window too small for the norm integral", n=n)
            return log(pi) + val
        prev, h = val, h / 2
    raise AccuracyError("norm quadrature did not converge under doubling", n=n)


def section_log_norms(metric: BundleMetric) -> np.ndarray:
    """``log ||w^n||^2`` for ``n < dimension``."""
    dim = metric.dimension
    if metric.default_family:
        s, m = metric.s, metric.m
        return np.array([log(pi / s) + _log_beta((n + 1) / s, m - (n + 1) / s) for n in range(dim)])
    return np.array([_log_norm_quadrature(metric, n) for n in range(dim)])


def section_norms(metric: BundleMetric) -> np.ndarray:
    """``||w^n||^2``; for the default family ``(pi/s) B((n+1)/s, m - (n+1)/s)``."""
    return np.exp(section_log_norms(metric))


def szego_density(metric: BundleMetric, w: complex, allowed=None, orbifold_order: int = 1) -> float:
    """``sum_n |w|^{2n} e^{-m psi(w)} / ||w^n||^2`` over ``allowed`` exponents.

    With ``orbifold_order = s`` the norms are taken over the quotient chart,
    i.e. divided by ``s``.
    """
    u = abs(w) ** 2
    ln = section_log_norms(metric) - log(orbifold_order)
    n = np.arange(len(ln))
    if allowed is not None:
        mask = np.array([bool(allowed(int(k))) for k in n], dtype=bool) if len(n) else np.zeros(0, bool)
        n, ln = n[mask], ln[mask]
    if len(n) == 0:
        return 0.0
    pot = float(metric.potential(u))
    if u == 0:
        return float(np.exp(-ln[0]) * exp(-metric.m * pot)) if n[0] == 0 else 0.0
    logt = n * log(u) - metric.m * pot - ln
    top = logt.max()
    return float(exp(top) * np.exp(logt - top).sum())


def density_at_origin_closed_form(r: int, m: int) -> float:
    """``Pi_m(0) = s / (pi B(1/s, m - 1/s))`` for the default family."""
    s = r / 2
    return s / (pi * exp(_log_beta(1 / s, m - 1 / s)))


def model_prefactor(r: int) -> float:
    """Limit of ``m^{-2/r} Pi_m(0)``: ``(r/2) / (pi Gamma(2/r))``."""
    return (r / 2) / (pi * gamma(2 / r))


@dataclass
class AsymptoticsReport:
    r: int
    m_list: list
    values: list
    exponent: float
    exponent_uncertainty: float
    prefactor: float
    prefactor_closed_form: float
    fock_identity: dict
    convention: str = CONVENTION
    coefficients: list = field(default_factory=list)

    def to_csv(self) -> str:
        rows = ["m,value"] + [f"{m},{float(v)!r}" for m, v in zip(self.m_list, self.values)]
        return "\n".join(rows) + "\n"


def degenerate_point_asymptotics(r: int, m_list, n_corr: int = 3) -> AsymptoticsReport:
    """``Pi_m(0)`` over ``m_list``; leading exponent and prefactor of ``m^{2/r}``."""
    from ftkl.fock import HomogeneousWeight, model_constant_c0

    ms = sorted(int(m) for m in m_list)
    vals = [szego_density(BundleMetric(r, m), 0.0) for m in ms]
    est = estimate_leading_exponent(np.column_stack([-1.0 / np.array(ms, float), vals]))
    M = np.array(ms, float)
    A = np.column_stack([M ** (2 / r - j) for j in range(n_corr)])
    wts = 1 / np.array(vals)
    coef, *_ = np.linalg.lstsq(A * wts[:, None], np.ones(len(ms)), rcond=None)
    c0 = model_constant_c0(HomogeneousWeight.radial_weight(r))
    # fock: B_t(0,0) = t^{2/r} c0 with 2t = m
    fock_lead = c0 * 0.5 ** (2 / r)
    top = ms[-1]
    identity = {
        "fock_c0": c0,
        "fock_prefactor": fock_lead,
        "bundle_ratio_at_largest_m": vals[-1] / top ** (2 / r),
        "relative_gap": abs(vals[-1] / top ** (2 / r) - fock_lead) / fock_lead,
    }
    return AsymptoticsReport(
        r, ms, vals, est.value, est.uncertainty, float(coef[0]), model_prefactor(r), identity,
        coefficients=[float(c) for c in coef],
    )


@dataclass
class PscCoefficients:
    c0_hat: float
    c1_hat: float
    c0_expected: float
    residual: float
    m_list: list
    values: list
    convention: str = CONVENTION


def strongly_psc_coefficients(metric: BundleMetric, w: complex, m_list, n_corr: int = 4) -> PscCoefficients:
    """Fit ``Pi_m(w) = c0 m + c1 + c2/m + ...``; expected ``c0 = (u F')'(u) / pi``."""
    u = abs(w) ** 2
    kappa = float(metric.curvature_density(u))
    if not kappa > 0:
        raise DomainError("curvature vanishes at w; use degenerate_point_asymptotics", u=u)
    ms = sorted(int(m) for m in m_list)
    vals = np.array([szego_density(metric.with_m(m), w) for m in ms])
    M = np.array(ms, float)
    A = np.column_stack([M ** (1 - j) for j in range(n_corr)])
    wts = 1 / vals
    coef, *_ = np.linalg.lstsq(A * wts[:, None], np.ones(len(ms)), rcond=None)
    resid = float(np.abs((A @ coef - vals) / vals).max())
    return PscCoefficients(float(coef[0]), float(coef[1]), kappa / pi, resid, ms, [float(v) for v in vals])


def phase_factor(s: int, m: int) -> int:
    """``sum_{l<s} e^{2 pi i l m / s}``: ``s`` if ``s | m`` else ``0``."""
    if s < 1:
        raise DomainError("stabilizer order must be >= 1", s=s)
    return s if m % s == 0 else 0


def phase_factor_structural(s: int, m: int, r: int = 4) -> int:
    """Phase factor from the invariant basis at a ``Z_s`` fixed point.

    ``Z_s`` acts on the chart by ``w -> e^{2 pi i/s} w`` and on the fibre of
    ``L^m`` by ``e^{2 pi i m/s}``, so ``w^n`` is invariant iff ``n + m = 0 mod s``.
    The invariant density on the quotient (norms over ``1/s`` of the chart)
    divided by the chart density at the fixed point gives the factor.
    """
    if s < 1:
        raise DomainError("stabilizer order must be >= 1", s=s)
    metric = BundleMetric(r, m)
    full = szego_density(metric, 0.0)
    if full == 0:
        raise DomainError("no sections at this m; pick larger r", r=r, m=m)
    inv = szego_density(metric, 0.0, allowed=lambda n: (n + m) % s == 0, orbifold_order=s)
    ratio = inv / full
    k = int(round(ratio))
    if abs(ratio - k) > 1e-12 * max(1, k):
        raise AccuracyError("structural phase factor not an integer", ratio=ratio)
    return k
