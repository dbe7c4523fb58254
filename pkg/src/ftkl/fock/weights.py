"""Homogeneous subharmonic weights on the plane and compactly supported perturbations."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from ftkl.errors import DomainError, UnsupportedWeightError

DEFAULT_ELLIPTICITY = 1e-6


def smooth_cutoff(s):
    """C^infinity bump in ``s >= 0``: 1 on ``[0, 1/2]``, 0 on ``[1, inf)``."""
    s = np.asarray(s, dtype=float)

    def f(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a = f(1.0 - s)
    b = f(s - 0.5)
    return a / (a + b)


def _parse_poly(expr: str):
    import sympy as sp

    p1, p2 = sp.symbols("p1 p2")
    P = sp.Poly(sp.expand(sp.sympify(expr, locals={"p1": p1, "p2": p2})), p1, p2)
    coeffs = {}
    for (i, j), c in P.terms():
        if not c.is_real:
            raise DomainError("weight polynomial must have real coefficients", term=str(c))
        coeffs[(int(i), int(j))] = float(c)
    return coeffs


def _poly_eval(coeffs: dict, p1, p2):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    out = np.zeros(np.broadcast(p1, p2).shape)
    for (i, j), c in coeffs.items():
        out = out + c * p1**i * p2**j
    return out


def _poly_laplacian(coeffs: dict) -> dict:
    out: dict = {}
    for (i, j), c in coeffs.items():
        if i >= 2:
            out[(i - 2, j)] = out.get((i - 2, j), 0.0) + c * i * (i - 1)
        if j >= 2:
            out[(i, j - 2)] = out.get((i, j - 2), 0.0) + c * j * (j - 1)
    return out


@dataclass(frozen=True)
class Perturbation:
    """``phi1(p) = chi(|p| / R0) * poly(p)`` with the smooth cutoff ``chi``."""

    coeffs: dict
    cutoff_radius: float

    @classmethod
    def from_poly(cls, expr: str, cutoff_radius: float) -> "Perturbation":
        return cls(_parse_poly(expr), float(cutoff_radius))

    def __call__(self, p1, p2):
        rad = np.hypot(p1, p2) / self.cutoff_radius
        return smooth_cutoff(rad) * _poly_eval(self.coeffs, p1, p2)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs.values())


@dataclass(frozen=True)
class HomogeneousWeight:
    """Model potential ``phi0`` of degree ``r`` in ``(p1, p2)``, optional ``phi1``.

    ``coeffs`` maps ``(i, j)`` to the coefficient of ``p1**i p2**j``.  Radial
    weights ``|p|^r`` with odd ``r`` have no polynomial form and use
    ``coeffs=None, radial=True``.
    """

    r: int
    coeffs: dict | None = None
    radial: bool = False
    phi1: Perturbation | None = None
    n_grid: int = 720
    eps_g: float = DEFAULT_ELLIPTICITY
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.r < 2:
            raise DomainError("degree r must be >= 2", r=self.r)
        if self.coeffs is None and not self.radial:
            raise DomainError("need polynomial coefficients or radial=True")
        if self.coeffs is not None:
            bad = [ij for ij, c in self.coeffs.items() if c != 0 and sum(ij) != self.r]
            if bad:
                raise DomainError("phi0 is not homogeneous of degree r", monomials=bad)
            lap = self.laplacian_profile()
            if lap.size and lap.min() < -1e-12:
                raise DomainError("phi0 is not subharmonic", min_laplacian=float(lap.min()))

    # --- constructors

    @classmethod
    def radial_weight(cls, r: int) -> "HomogeneousWeight":
        """``|p|^r``; for even ``r`` the binomial expansion is kept for the quadrature route."""
        if r % 2 == 0:
            k = r // 2
            coeffs = {(2 * i, 2 * (k - i)): float(comb(k, i)) for i in range(k + 1)}
            return cls(r=r, coeffs=coeffs, radial=True, label=f"|p|^{r}")
        return cls(r=r, coeffs=None, radial=True, label=f"|p|^{r}")

    @classmethod
    def from_poly(cls, expr: str, r: int | None = None, **kw) -> "HomogeneousWeight":
        coeffs = _parse_poly(expr)
        degs = {i + j for (i, j), c in coeffs.items() if c != 0}
        if r is None:
            if len(degs) != 1:
                raise DomainError("phi0 is not homogeneous", degrees=sorted(degs))
            r = degs.pop()
        return cls(r=r, coeffs=coeffs, label=expr, **kw)

    def with_perturbation(self, phi1: Perturbation) -> "HomogeneousWeight":
        return HomogeneousWeight(
            r=self.r, coeffs=self.coeffs, radial=self.radial, phi1=phi1,
            n_grid=self.n_grid, eps_g=self.eps_g, label=self.label,
        )

    def without_perturbation(self) -> "HomogeneousWeight":
        return HomogeneousWeight(
            r=self.r, coeffs=self.coeffs, radial=self.radial,
            n_grid=self.n_grid, eps_g=self.eps_g, label=self.label,
        )

    # --- evaluation

    def phi0(self, p1, p2):
        if self.coeffs is None:
            return np.hypot(p1, p2) ** self.r
        return _poly_eval(self.coeffs, p1, p2)

    def __call__(self, p1, p2):
        out = self.phi0(p1, p2)
        if self.phi1 is not None:
            out = out + self.phi1(p1, p2)
        return out

    def angular_profile(self, theta):
        """``g(theta) = phi0(cos theta, sin theta)``."""
        theta = np.asarray(theta, dtype=float)
        if self.coeffs is None:
            return np.ones_like(theta)
        return self.phi0(np.cos(theta), np.sin(theta))

    def laplacian_profile(self) -> np.ndarray:
        if self.coeffs is None:
            return np.full(self.n_grid, float(self.r**2))
        th = np.linspace(0, 2 * np.pi, self.n_grid, endpoint=False)
        return _poly_eval(_poly_laplacian(self.coeffs), np.cos(th), np.sin(th))

    @property
    def ellipticity(self) -> float:
        th = np.linspace(0, 2 * np.pi, self.n_grid, endpoint=False)
        return float(self.angular_profile(th).min())

    def check_gram_route(self) -> None:
        if self.radial:
            return
        if self.ellipticity <= self.eps_g:
            raise UnsupportedWeightError(
                "weight has (near) angular zeros; monomials are not integrable",
                ellipticity=self.ellipticity, eps_g=self.eps_g,
            )

    def is_homogeneous_identity(self, lam: float = 1.7, n: int = 16) -> bool:
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        p1, p2 = np.cos(th) * 0.8, np.sin(th) * 0.8
        lhs = self.phi0(lam * p1, lam * p2)
        return bool(np.allclose(lhs, lam**self.r * self.phi0(p1, p2), rtol=1e-12, atol=0))

    def describe(self) -> dict:
        return {
            "r": self.r,
            "phi0": self.label or str(self.coeffs),
            "radial": self.radial,
            "ellipticity": self.ellipticity,
            "phi1": None
            if self.phi1 is None
            else {"poly": {f"{i},{j}": c for (i, j), c in self.phi1.coeffs.items()},
                  "cutoff_radius": self.phi1.cutoff_radius},
        }


ELLIPTIC_EXAMPLE = "p1**2*p2**2 + (p1**2 + p2**2)**2/10"
