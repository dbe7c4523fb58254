"""Jet-level normal form at a finite-type point of a 3-dimensional CR structure.

Input is Christ normal-form data: a homogeneous real polynomial ``p(x1, x2)``
of degree ``r`` and a real remainder field ``R = sum r_j d/dx_j`` of weight
``>= 0`` for the privileged weights ``(1, 1, r)``, defining

    Z = (d1 + i d2)/2 + (d2 p - i d1 p)/2 d3 + (i/2) R.

The pipeline, all in exact arithmetic on truncated jets:

1. :func:`solve_commuting_T` -- ``T = d3 + ...`` with ``[T, Z] = 0``;
2. :func:`almost_analytic_coordinates` -- coordinates ``w`` straightening ``T``,
   then ``ztilde`` in which ``Z = (d1 + i d2)/2 + a3 d3``;
3. :func:`extract_potential` -- ``phi`` with ``a3 = -(i/2)(d1 + i d2) phi``.

Holomorphic extension is the identity at jet level (a polynomial in ``x`` is
read as a polynomial in ``z``), and the infinite-order flow correction that
would remove an ``O(|z|^inf)`` remainder has nothing to act on, so every stage
instead carries a residual certificate: the largest coefficient of its defect
through the certified degree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ftkl.errors import CertificationError, DomainError
from ftkl.jets import (
    HALF,
    I,
    Jet,
    QQi,
    apply_field,
    bracket,
    dbar,
    dbar_solve,
    jet_compose,
)

log = logging.getLogger(__name__)

# Each triangular stage loses at most one degree of certified accuracy through
# derivatives of truncated jets; two guard degrees keep all certificates exact
# through the requested order.
GUARD = 2


@dataclass(frozen=True)
class ChristNormalFormData:
    r: int
    p: Jet
    R: tuple[Jet, Jet, Jet]
    maxdeg: int

    @classmethod
    def build(cls, p, R=None, order: int | None = None, r: int | None = None) -> "ChristNormalFormData":
        """Convenience constructor from polynomial strings.

        ``p`` is a polynomial in ``x1, x2``; ``R`` is ``None`` or three
        polynomials in ``x1, x2, x3``.  ``order`` is the certified order ``N``
        (default ``2r``); jets are carried ``GUARD`` degrees further.
        """
        p2 = Jet.from_poly(p, 2, 64)
        degs = p2.degrees()
        if r is None:
            if len(degs) != 1:
                raise DomainError("p must be homogeneous", degrees=sorted(degs))
            r = degs.pop()
        N = 2 * r if order is None else int(order)
        M = N + GUARD
        p3 = Jet.from_poly(p, 3, M)
        if R is None:
            Rj = tuple(Jet.zero(3, M) for _ in range(3))
        else:
            Rj = tuple(r_ if isinstance(r_, Jet) else Jet.from_poly(r_, 3, M) for r_ in R)
        data = cls(r=r, p=p3, R=Rj, maxdeg=M)
        data.validate()
        return data

    @property
    def order(self) -> int:
        return self.maxdeg - GUARD

    def validate(self, n_circle: int = 360) -> None:
        if self.r < 2:
            raise DomainError("type r must be >= 2", r=self.r)
        if self.order < self.r:
            raise DomainError("working order must be >= r", order=self.order, r=self.r)
        if self.p.degrees() != {self.r}:
            raise DomainError("p must be homogeneous of degree r", degrees=sorted(self.p.degrees()))
        if any(a[2] for a, _ in self.p.items()):
            raise DomainError("p must not depend on x3")
        if not self.p.is_real():
            raise DomainError("p must have real coefficients")
        lap = self.p.derive(0).derive(0) + self.p.derive(1).derive(1)
        th = np.linspace(0.0, 2 * np.pi, n_circle, endpoint=False)
        vals = lap(np.cos(th), np.sin(th), 0.0).real
        if vals.min() < -1e-12:
            raise DomainError("p is not subharmonic on the circle grid", min_laplacian=float(vals.min()))
        min_w = (1, 1, self.r)
        for j, rj in enumerate(self.R):
            if not rj.is_real():
                raise DomainError(f"R component {j + 1} is not real")
            if rj.weighted_order((1, 1, self.r)) < min_w[j]:
                raise DomainError(
                    f"R component {j + 1} has weight below {min_w[j]}",
                    weight=rj.weighted_order((1, 1, self.r)),
                )

    def Z(self) -> list[Jet]:
        """Components of ``Z`` as jets."""
        M = self.maxdeg
        one = Jet.const(1, 3, M)
        z1 = one.scale(HALF) + self.R[0].scale(I * HALF)
        z2 = one.scale(I * HALF) + self.R[1].scale(I * HALF)
        z3 = (self.p.derive(1) - self.p.derive(0).scale(I)).scale(HALF) + self.R[2].scale(I * HALF)
        return [z1, z2, z3]


@dataclass
class NormalFormResult:
    r: int
    order: int
    T: list[Jet]
    w: list[Jet]
    a: list[Jet]
    wtilde: list[Jet]
    ztilde: list[Jet]
    a3_tilde: Jet
    phi: Jet
    phi0: Jet
    residuals: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    def certified(self) -> bool:
        return all(v == 0 for v in self.residuals.values()) and all(self.checks.values())

    def to_json(self) -> dict:
        def series(j: Jet):
            return j.to_text().splitlines()

        return {
            "r": self.r,
            "order": self.order,
            "maxdeg": self.phi.maxdeg,
            "T": [series(t) for t in self.T],
            "w": [series(x) for x in self.w],
            "ztilde": [series(x) for x in self.ztilde],
            "phi": series(self.phi),
            "phi0": series(self.phi0),
            "residuals": self.residuals,
            "checks": self.checks,
            "format": "a1 a2 [a3] re im per term; exact rationals num/den",
        }


def _defect_max(jets, through: int) -> float:
    return max(j.max_abs_coeff(through) for j in jets)


def solve_commuting_T(data: ChristNormalFormData) -> list[Jet]:
    """Vector field ``T = d/dx3 + O(|x|)`` with ``[T, Z]`` vanishing through the working order.

    Degree-``d`` part of ``[T, Z]_j`` is ``-(d1 + i d2)/2`` applied to the
    degree-``d+1`` part of ``t_j`` plus terms involving only lower-degree
    coefficients, so each pass kills one degree of the defect.
    """
    M = data.maxdeg
    Z = data.Z()
    T = [Jet.zero(3, M), Jet.zero(3, M), Jet.const(1, 3, M)]
    for d in range(M):
        D = bracket(T, Z)
        T = [t + dbar_solve(Dj.homogeneous_part(d)) for t, Dj in zip(T, D)]
    return T


def _straighten(field_, targets, starts, integrate_var: int | None, degrees: int):
    """Defect-correction loop for ``field(w) = target`` with ``w = start + corrections``.

    With ``integrate_var`` set the leading operator is ``d/dx_var`` (inverse:
    integration with zero constant); otherwise it is ``(d1 + i d2)/2``
    (inverse: :func:`dbar_solve`).
    """
    ws = list(starts)
    for d in range(degrees):
        new = []
        for w, tgt in zip(ws, targets):
            D = (apply_field(field_, w) - tgt).homogeneous_part(d)
            if D.is_zero():
                new.append(w)
                continue
            corr = D.integrate(integrate_var) if integrate_var is not None else dbar_solve(D)
            new.append(w - corr)
        ws = new
    return ws


def _invert_near_identity(maps: list[Jet]) -> list[Jet]:
    """Inverse of ``v = u + h(u)`` (``h`` of order >= 2) by fixed-point iteration."""
    nv, M = maps[0].nvars, maps[0].maxdeg
    ids = [Jet.var(k, nv, M) for k in range(nv)]
    h = [m - x for m, x in zip(maps, ids)]
    inv = list(ids)
    for _ in range(M):
        nxt = [x - jet_compose(hk, inv) for x, hk in zip(ids, h)]
        if nxt == inv:
            break
        inv = nxt
    return inv


def almost_analytic_coordinates(data: ChristNormalFormData, T: list[Jet]):
    """Coordinates ``w`` with ``T w = (0, 0, 1)`` and ``ztilde`` straightening ``Z``.

    Returns ``(w, ztilde, a, wtilde, a3_tilde)`` where ``a_j = Z(w_j)`` are the
    coefficients of ``Z`` in the ``w``-frame, ``wtilde`` are the 2-variable
    jets in ``(w1, w2)`` solving ``(a1 d1 + a2 d2) wtilde = (1/2, i/2)`` and
    ``a3_tilde`` is ``a3`` written in the ``wtilde`` coordinates.
    """
    M = data.maxdeg
    x = [Jet.var(k, 3, M) for k in range(3)]
    one, zero = Jet.const(1, 3, M), Jet.zero(3, M)
    # T = d3 + (T - d3); the correction is integration in x3, so every
    # higher-order term of w is a multiple of x3.
    w = _straighten(T, [zero, zero, one], x, integrate_var=2, degrees=M)
    Z = data.Z()
    a = [apply_field(Z, wj) for wj in w]
    # w_j(x1, x2, 0) = x_j, so a_j as functions of (w1, w2) are their x3 = 0 slices
    A = [aj.drop_var(2) for aj in a]
    u = [Jet.var(0, 2, M), Jet.var(1, 2, M)]
    half2 = Jet.const(HALF, 2, M)
    ihalf2 = Jet.const(I * HALF, 2, M)
    wt = _straighten(A[:2], [half2, ihalf2], u, integrate_var=None, degrees=M)
    inv = _invert_near_identity(wt)
    a3t = jet_compose(A[2], inv)
    ztilde = [jet_compose(wt[0], w[:2]), jet_compose(wt[1], w[:2]), w[2]]
    return w, ztilde, a, wt, a3t


def extract_potential(a3: Jet, r: int, gauge: str = "real", check_real: bool = True):
    """Potential ``phi`` with ``a3 = -(i/2)(d1 + i d2) phi`` and its degree-``r`` part.

    ``gauge="real"`` (default) fixes the free holomorphic-in-zeta part so that
    ``phi`` is real whenever possible; ``"kill_zeta_pure"`` drops it.  With
    ``check_real`` a non-real ``phi0`` raises :class:`CertificationError`; it
    is never symmetrized.
    """
    if a3.nvars != 2:
        a3 = a3.drop_var(2)
    phi = dbar_solve(a3.scale(I), gauge=gauge)
    phi0 = phi.homogeneous_part(r)
    if check_real and not phi0.is_real():
        raise CertificationError(
            "phi0 has nonzero imaginary coefficients", max_imag=_max_imag(phi0), gauge=gauge
        )
    return phi, phi0


def _max_imag(j: Jet) -> float:
    return max((abs(float(c.im)) for _, c in j.items()), default=0.0)


def laplacian_on_circle(phi0: Jet, n: int = 360) -> np.ndarray:
    lap = phi0.derive(0).derive(0) + phi0.derive(1).derive(1)
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return lap(np.cos(th), np.sin(th)).real


def normal_form(data: ChristNormalFormData, gauge: str = "real") -> NormalFormResult:
    """Run all stages and attach residual certificates through ``data.order``."""
    N, M, r = data.order, data.maxdeg, data.r
    Z = data.Z()
    T = solve_commuting_T(data)
    w, ztilde, a, wt, a3t = almost_analytic_coordinates(data, T)
    phi, phi0 = extract_potential(a3t, r, gauge=gauge, check_real=False)

    res: dict[str, float] = {}
    res["T_Z_bracket"] = _defect_max(bracket(T, Z), N)
    one, zero = Jet.const(1, 3, M), Jet.zero(3, M)
    res["T_w"] = _defect_max(
        [apply_field(T, wj) - tgt for wj, tgt in zip(w, [zero, zero, one])], N
    )
    res["a_independent_of_w3"] = _defect_max([apply_field(T, aj) for aj in a], N)
    A = [aj.drop_var(2) for aj in a]
    res["wtilde_straightening"] = _defect_max(
        [
            apply_field(A[:2], wt[0]) - Jet.const(HALF, 2, M),
            apply_field(A[:2], wt[1]) - Jet.const(I * HALF, 2, M),
        ],
        N,
    )
    res["potential_equation"] = (a3t + dbar(phi).scale(I)).max_abs_coeff(N)
    # reconstruct the model field in the ztilde chart and compare with Z
    model3 = jet_compose(dbar(phi).scale(QQi(0, -1)), ztilde[:2])
    res["Z_reconstruction"] = _defect_max(
        [
            apply_field(Z, ztilde[0]) - one.scale(HALF),
            apply_field(Z, ztilde[1]) - one.scale(I * HALF),
            apply_field(Z, ztilde[2]) - model3,
        ],
        N,
    )
    res["T_reconstruction"] = _defect_max(
        [apply_field(T, zt) - tgt for zt, tgt in zip(ztilde, [zero, zero, one])], N
    )
    lin_ok = all(
        ztilde[j].homogeneous_part(1) == Jet.var(j, 3, M) and ztilde[j].order() >= 1
        for j in range(3)
    )
    checks = {
        "ztilde_linear_part_identity": lin_ok,
        "phi0_real": phi0.is_real(),
        "phi0_homogeneous": phi0.degrees() <= {r},
        "phi0_subharmonic": bool(laplacian_on_circle(phi0).min() >= -1e-12) if phi0.is_real() else False,
    }
    res["phi_below_degree_r"] = phi.truncate(r - 1).max_abs_coeff()
    result = NormalFormResult(
        r=r, order=N, T=T, w=w, a=a, wtilde=wt, ztilde=ztilde, a3_tilde=a3t,
        phi=phi, phi0=phi0, residuals=res, checks=checks,
    )
    log.debug("normal form residuals %s", res)
    return result
