"""Bergman kernels of the egg domains ``E_k = {|z1|^2 + |z2|^{2k} < 1}``.

The monomials ``z1^a z2^b`` are orthogonal with norms
``N(a, b) = pi^2 B((b+1)/k, a+2) / (k (a+1))``.  On the diagonal the sum over
``a`` collapses with ``sum_a Gamma(a+c) x^a / Gamma(a+1) = Gamma(c) (1-x)^{-c}``,
leaving one series in ``b``:

    sum_b (k / pi^2) c_b (c_b + 1) (1 - |z1|^2)^{-2-c_b} |z2|^{2b},   c_b = (b+1)/k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, gamma, lgamma, log, pi, sqrt

import numpy as np
from scipy.optimize import brentq

from ftkl.errors import AccuracyError, DomainError

TAIL_RTOL = 1e-10
MAX_TERMS = 50_000_000
CHUNK = 1 << 20


def monomial_norm(k: int, a: int, b: int) -> float:
    """``||z1^a z2^b||^2`` in ``L^2(E_k)``."""
    if k < 1 or a < 0 or b < 0:
        raise DomainError("need k >= 1 and a, b >= 0", k=k, a=a, b=b)
    c = (b + 1) / k
    logB = lgamma(c) + lgamma(a + 2) - lgamma(c + a + 2)
    return pi**2 * exp(logB) / (k * (a + 1))


def axis_leading_coefficient(k: int) -> float:
    """``a0(k) = k Gamma(2 + 1/k) / (pi^2 Gamma(1/k))``."""
    return k * gamma(2 + 1 / k) / (pi**2 * gamma(1 / k))


def axis_diagonal_closed_form(k: int, s: float) -> float:
    """``Pi((s, 0), (s, 0)) = a0(k) (1 - s^2)^{-2-1/k}``."""
    if not 0 <= abs(s) < 1:
        raise DomainError("need |s| < 1", s=s)
    return axis_leading_coefficient(k) * (1 - s * s) ** (-2 - 1 / k)


@dataclass(frozen=True)
class EggDomain:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("k must be >= 1", k=self.k)

    @property
    def r(self) -> int:
        return 2 * self.k

    def rho(self, z) -> float:
        z1, z2 = z
        return abs(z1) ** 2 + abs(z2) ** (2 * self.k) - 1

    def type_at(self, z, tol: float = 1e-12) -> int:
        if abs(self.rho(z)) > tol:
            raise DomainError("point is not on the boundary", rho=self.rho(z))
        return 2 * self.k if z[1] == 0 else 2

    def contains(self, z) -> bool:
        return self.rho(z) < 0


@dataclass(frozen=True)
class DiagonalValue:
    value: float
    tail_bound: float
    terms: int


def _resummed(k: int, u: float, w: float, cap: int | None, rtol: float, one_minus_u=None) -> DiagonalValue:
    lead = log(k / pi**2)
    lu = float(np.log1p(-u)) if one_minus_u is None else log(one_minus_u)
    if w == 0:
        c = 1 / k
        return DiagonalValue(exp(lead + log(c * (c + 1)) - (2 + c) * lu), 0.0, 1)
    lw = log(w)
    y = exp(lw - lu / k)  # asymptotic term ratio
    if y >= 1:
        raise DomainError("point outside the convergence region", ratio=y)
    if cap is None:
        # term_b ~ b^2 y^b; pick b with b^2 y^b / (1-y) below rtol relative to the first term
        need = 64
        while need < MAX_TERMS and 2 * log(need) + need * log(y) - log(1 - y) > log(rtol) - 5:
            need *= 2
        cap = min(need, MAX_TERMS)
    total = 0.0
    last_log = None
    for start in range(0, cap + 1, CHUNK):
        b = np.arange(start, min(cap, start + CHUNK - 1) + 1, dtype=float)
        c = (b + 1) / k
        logt = lead + np.log(c * (c + 1)) - (2 + c) * lu + b * lw
        total += float(np.exp(logt).sum())
        last_log = float(logt[-1])
    # ratios term_{b+1}/term_b decrease to y, so the ratio at cap bounds the tail
    c1, c2 = (cap + 1) / k, (cap + 2) / k
    q = exp(log(c2 * (c2 + 1)) - log(c1 * (c1 + 1)) - lu / k + lw)
    tail = exp(last_log) * q / (1 - q) if q < 1 else float("inf")
    if tail > rtol * total:
        raise AccuracyError(
            "series tail above tolerance at degree cap; raise degree_cap",
            cap=cap, tail=tail, value=total,
        )
    return DiagonalValue(total, tail, cap + 1)


def _double_series(k: int, u: float, w: float, cap: int) -> DiagonalValue:
    a = np.arange(cap + 1)
    b = np.arange(cap + 1)
    A, Bm = np.meshgrid(a, b, indexing="ij")
    c = (Bm + 1) / k
    lg = np.vectorize(lgamma)
    logN = 2 * log(pi) + lg(c) + lg(A + 2.0) - lg(c + A + 2) - np.log(k * (A + 1.0))
    with np.errstate(divide="ignore"):
        lu = log(u) if u > 0 else -np.inf
        lw = log(w) if w > 0 else -np.inf
        logt = np.where(A > 0, A * lu, 0.0) + np.where(Bm > 0, Bm * lw, 0.0) - logN
    terms = np.exp(logt)
    total = float(terms.sum())
    edge = float(terms[-1, :].sum() + terms[:, -1].sum())
    return DiagonalValue(total, edge, (cap + 1) ** 2)


def diagonal_value(
    k: int,
    z,
    degree_cap: int | None = None,
    method: str = "resummed",
    rtol: float = TAIL_RTOL,
    one_minus_u: float | None = None,
) -> DiagonalValue:
    """``Pi_{E_k}(z, z)``.

    ``method="resummed"`` sums ``a`` exactly and truncates ``b`` at ``degree_cap``
    with a geometric tail bound; ``method="double"`` is the literal truncated
    double series (for interior points; ``tail_bound`` is then the last-shell
    size, a heuristic).  ``one_minus_u`` may supply ``1 - |z1|^2`` computed
    without cancellation (near the boundary it dominates the rounding error).
    """
    z1, z2 = z
    u, w = abs(z1) ** 2, abs(z2) ** 2
    if u + w**k >= 1:
        raise DomainError("point is not inside E_k", rho=u + w**k - 1)
    if method == "resummed":
        return _resummed(k, u, w, degree_cap, rtol, one_minus_u)
    if method == "double":
        return _double_series(k, u, w, 200 if degree_cap is None else degree_cap)
    raise ValueError(f"unknown method {method!r}")


def generic_base_point(k: int, v: float = 0.25):
    """Boundary point with ``|z2|^2 = v`` on the positive real slice."""
    return (sqrt(1 - v**k), sqrt(v))


def normal_line_point(k: int, base, rho: float):
    """Point on the inward normal at ``base`` (real slice) with defining function ``rho``."""
    x1, x2 = float(base[0]), float(base[1])
    g = np.array([2 * x1, 2 * k * x2 ** (2 * k - 1)])
    n = g / np.hypot(*g)
    f = lambda tau: (x1 - tau * n[0]) ** 2 + abs(x2 - tau * n[1]) ** (2 * k) - 1 - rho  # noqa: E731
    hi = 1e-3
    while f(hi) > 0:
        hi *= 2
    tau = brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return (x1 - tau * n[0], x2 - tau * n[1])


@dataclass
class BoundarySamples:
    k: int
    point: str
    base: tuple
    rho: np.ndarray
    value: np.ndarray
    tail_bound: np.ndarray
    points: list = field(default_factory=list)

    @property
    def type(self) -> int:
        return 2 * self.k if self.point == "degenerate" else 2

    def to_csv(self) -> str:
        rows = ["rho,value,tail_bound"]
        rows += [f"{float(r)!r},{float(v)!r},{float(e)!r}" for r, v, e in zip(self.rho, self.value, self.tail_bound)]
        return "\n".join(rows) + "\n"


def boundary_samples(k: int, point: str, rho_list, v: float = 0.25, degree_cap: int | None = None) -> BoundarySamples:
    """Diagonal kernel along the inward normal at a type-2k (``degenerate``) or type-2 (``generic``) point."""
    rho_list = np.asarray(rho_list, dtype=float)
    if np.any(rho_list >= 0):
        raise DomainError("rho values must be negative")
    if point == "degenerate":
        base = (1.0, 0.0)
        pts = [(sqrt(1 + r), 0.0) for r in rho_list]
    elif point == "generic":
        base = generic_base_point(k, v)
        pts = [normal_line_point(k, base, r) for r in rho_list]
    else:
        raise ValueError("point must be 'degenerate' or 'generic'")
    # 1 - |z1|^2 = |z2|^{2k} - rho on the sampled points, free of cancellation
    vals = [
        diagonal_value(k, p, degree_cap, one_minus_u=abs(p[1]) ** (2 * k) - r)
        for p, r in zip(pts, rho_list)
    ]
    return BoundarySamples(
        k, point, base, rho_list,
        np.array([d.value for d in vals]), np.array([d.tail_bound for d in vals]), pts,
    )
