"""Truncated multivariate power series (jets) with exact Gaussian-rational coefficients.

A :class:`Jet` stores the Taylor coefficients of a function of 2 or 3 variables
through a fixed total degree ``maxdeg``.  Coefficients are :class:`QQi` values
(exact ``re + i*im`` with rational parts) whenever the inputs are rational;
float inputs are accepted but the jet is then flagged ``exact=False``.

The one non-trivial solver lives here as well: :func:`dbar_solve`, the
degree-by-degree right inverse of ``(d/dx1 + i d/dx2)/2``.  In the complex
linear coordinates ``zeta = x1 + i x2``, ``eta = x1 - i x2`` that operator is
exactly ``d/d eta``, so the solve is an integration in ``eta``.
"""

from __future__ import annotations

import numbers
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from ftkl.errors import DomainError, ShapeError

try:  # gmpy2 rationals are an order of magnitude faster than Fraction
    from gmpy2 import mpq as _Q

    _RATIONAL_TYPES: tuple = (int, Fraction, type(_Q(0)))
except ImportError:  # pragma: no cover
    _Q = Fraction
    _RATIONAL_TYPES = (int, Fraction)


def _to_q(x):
    if isinstance(x, bool):
        return _Q(int(x))
    if isinstance(x, _RATIONAL_TYPES):
        return _Q(x)
    if isinstance(x, str):
        return _Q(Fraction(x))
    raise TypeError(f"not a rational: {x!r}")


class QQi:
    """Exact Gaussian rational ``re + i*im``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _to_q(re)
        self.im = _to_q(im)

    @classmethod
    def _raw(cls, re, im):
        obj = cls.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    @classmethod
    def coerce(cls, x):
        if isinstance(x, QQi):
            return x
        if isinstance(x, complex):
            raise TypeError("complex floats are not exact")
        return cls(x, 0)

    def __add__(self, o):
        if isinstance(o, QQi):
            return QQi._raw(self.re + o.re, self.im + o.im)
        if isinstance(o, _RATIONAL_TYPES):
            return QQi._raw(self.re + o, self.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return QQi._raw(-self.re, -self.im)

    def __sub__(self, o):
        if isinstance(o, QQi):
            return QQi._raw(self.re - o.re, self.im - o.im)
        if isinstance(o, _RATIONAL_TYPES):
            return QQi._raw(self.re - o, self.im)
        return NotImplemented

    def __rsub__(self, o):
        return (-self).__add__(o)

    def __mul__(self, o):
        if isinstance(o, QQi):
            return QQi._raw(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        if isinstance(o, _RATIONAL_TYPES):
            return QQi._raw(self.re * o, self.im * o)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, _RATIONAL_TYPES):
            o = _Q(o)
            return QQi._raw(self.re / o, self.im / o)
        if isinstance(o, QQi):
            den = o.re * o.re + o.im * o.im
            return QQi._raw(
                (self.re * o.re + self.im * o.im) / den, (self.im * o.re - self.re * o.im) / den
            )
        return NotImplemented

    def conjugate(self):
        return QQi._raw(self.re, -self.im)

    def __eq__(self, o):
        if isinstance(o, QQi):
            return self.re == o.re and self.im == o.im
        if isinstance(o, _RATIONAL_TYPES):
            return self.im == 0 and self.re == o
        if isinstance(o, complex):
            return complex(self) == o
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        if not self.im:
            return f"QQi({self.re})"
        return f"QQi({self.re}, {self.im})"


I = QQi(0, 1)
HALF = QQi(Fraction(1, 2))


def _coerce_coeff(c):
    """Return ``(value, exact)``; exact values become QQi."""
    if isinstance(c, QQi):
        return c, True
    if isinstance(c, bool):
        return QQi(int(c)), True
    if isinstance(c, _RATIONAL_TYPES):
        return QQi(c), True
    if isinstance(c, numbers.Complex):
        return complex(c), False
    raise TypeError(f"unsupported coefficient {c!r}")


def _is_zero(c) -> bool:
    return not c


def _fmt_q(q) -> str:
    return f"{int(q.numerator)}/{int(q.denominator)}"


class Jet:
    """Truncated power series in ``nvars`` variables through total degree ``maxdeg``.

    Instances are immutable.  Zero coefficients are never stored.
    """

    __slots__ = ("nvars", "maxdeg", "_c", "exact", "weights")

    def __init__(
        self,
        nvars: int,
        maxdeg: int,
        coeffs: Mapping[tuple, object] | None = None,
        weights: Sequence[int] | None = None,
    ):
        if nvars not in (2, 3):
            raise ShapeError(f"nvars must be 2 or 3, got {nvars}")
        if maxdeg < 1:
            raise ShapeError(f"maxdeg must be >= 1, got {maxdeg}")
        self.nvars = nvars
        self.maxdeg = maxdeg
        self.weights = tuple(weights) if weights is not None else None
        exact = True
        store: dict[tuple, object] = {}
        for alpha, c in (coeffs or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != nvars or min(alpha) < 0:
                raise ShapeError(f"bad exponent {alpha} for nvars={nvars}")
            if sum(alpha) > maxdeg:
                continue
            value, ok = _coerce_coeff(c)
            exact &= ok
            if not _is_zero(value):
                store[alpha] = value
        if not exact:
            store = {a: complex(v) for a, v in store.items()}
        self._c = store
        self.exact = exact

    @classmethod
    def _wrap(cls, nvars, maxdeg, store, exact, weights=None):
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj.maxdeg = maxdeg
        obj._c = store
        obj.exact = exact
        obj.weights = weights
        return obj

    # --- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, nvars: int, maxdeg: int) -> "Jet":
        return cls(nvars, maxdeg)

    @classmethod
    def const(cls, c, nvars: int, maxdeg: int) -> "Jet":
        return cls(nvars, maxdeg, {(0,) * nvars: c})

    @classmethod
    def var(cls, i: int, nvars: int, maxdeg: int, coeff=1) -> "Jet":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, maxdeg, {tuple(alpha): coeff})

    @classmethod
    def monomial(cls, alpha: Sequence[int], maxdeg: int, coeff=1) -> "Jet":
        return cls(len(alpha), maxdeg, {tuple(alpha): coeff})

    @classmethod
    def from_poly(cls, poly, nvars: int, maxdeg: int) -> "Jet":
        """Build a jet from a sympy expression in ``x1, x2[, x3]`` or a string."""
        import sympy as sp

        xs = sp.symbols(" ".join(f"x{k + 1}" for k in range(nvars)))
        expr = sp.sympify(poly, locals={str(x): x for x in xs}) if isinstance(poly, str) else poly
        P = sp.Poly(sp.expand(expr), *xs)
        coeffs = {}
        for monom, c in P.terms():
            re, im = sp.re(c), sp.im(c)
            if not (re.is_Rational and im.is_Rational):
                raise TypeError(f"non-rational coefficient {c} in polynomial")
            coeffs[monom] = QQi(Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q)))
        return cls(nvars, maxdeg, coeffs)

    # --- inspection -------------------------------------------------------

    def items(self):
        return self._c.items()

    def coeff(self, alpha: Sequence[int]):
        return self._c.get(tuple(alpha), QQi(0) if self.exact else 0j)

    def __getitem__(self, alpha):
        return self.coeff(alpha)

    def __len__(self):
        return len(self._c)

    def is_zero(self) -> bool:
        return not self._c

    def degrees(self) -> set[int]:
        return {sum(a) for a in self._c}

    def order(self) -> int | None:
        """Lowest total degree present (``None`` for the zero jet)."""
        return min(self.degrees()) if self._c else None

    def weighted_order(self, weights: Sequence[int] | None = None):
        """Minimal weighted degree ``sum(w_i * alpha_i)`` over stored monomials."""
        w = tuple(weights) if weights is not None else self.weights
        if w is None:
            w = (1,) * self.nvars
        if not self._c:
            return float("inf")
        return min(sum(wi * ai for wi, ai in zip(w, a)) for a in self._c)

    def homogeneous_part(self, d: int) -> "Jet":
        return self._wrap(
            self.nvars, self.maxdeg, {a: c for a, c in self._c.items() if sum(a) == d}, self.exact
        )

    def truncate(self, d: int) -> "Jet":
        """Drop all terms above degree ``d`` (``maxdeg`` is kept)."""
        return self._wrap(
            self.nvars, self.maxdeg, {a: c for a, c in self._c.items() if sum(a) <= d}, self.exact
        )

    def max_abs_coeff(self, through: int | None = None) -> float:
        vals = [abs(c) for a, c in self._c.items() if through is None or sum(a) <= through]
        return float(max(vals)) if vals else 0.0

    def is_real(self) -> bool:
        """True when every coefficient has exactly zero imaginary part."""
        if self.exact:
            return all(c.im == 0 for c in self._c.values())
        return all(c.imag == 0 for c in self._c.values())

    def real_part(self) -> "Jet":
        if self.exact:
            store = {a: QQi._raw(c.re, _Q(0)) for a, c in self._c.items() if c.re}
        else:
            store = {a: complex(c.real) for a, c in self._c.items() if c.real}
        return self._wrap(self.nvars, self.maxdeg, store, self.exact)

    def conjugate_coeffs(self) -> "Jet":
        return self._wrap(
            self.nvars, self.maxdeg, {a: c.conjugate() for a, c in self._c.items()}, self.exact
        )

    # --- arithmetic -------------------------------------------------------

    def _check(self, other: "Jet"):
        if not isinstance(other, Jet):
            raise ShapeError(f"expected Jet, got {type(other).__name__}")
        if other.nvars != self.nvars or other.maxdeg != self.maxdeg:
            raise ShapeError(
                f"jet shape mismatch: ({self.nvars}, {self.maxdeg}) vs ({other.nvars}, {other.maxdeg})"
            )

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            return other
        return Jet.const(other, self.nvars, self.maxdeg)

    def _combine_exact(self, other: "Jet") -> bool:
        return self.exact and other.exact

    def _store_for(self, exact, store):
        if not exact:
            return {a: complex(c) for a, c in store.items()}
        return store

    def __add__(self, other) -> "Jet":
        other = self._lift(other)
        exact = self._combine_exact(other)
        store = dict(self._store_for(exact, self._c))
        for a, c in other._store_for(exact, other._c).items():
            v = store.get(a)
            v = c if v is None else v + c
            if _is_zero(v):
                store.pop(a, None)
            else:
                store[a] = v
        return self._wrap(self.nvars, self.maxdeg, store, exact)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return self._wrap(self.nvars, self.maxdeg, {a: -c for a, c in self._c.items()}, self.exact)

    def __sub__(self, other) -> "Jet":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Jet":
        return self._lift(other) - self

    def scale(self, c) -> "Jet":
        value, ok = _coerce_coeff(c)
        exact = self.exact and ok
        src = self._store_for(exact, self._c)
        if not exact:
            value = complex(value)
        store = {}
        for a, v in src.items():
            w = v * value
            if not _is_zero(w):
                store[a] = w
        return self._wrap(self.nvars, self.maxdeg, store, exact)

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self.scale(other)
        return self.mul(other)

    def __rmul__(self, other) -> "Jet":
        return self.scale(other)

    def mul(self, other: "Jet", degree: int | None = None) -> "Jet":
        """Truncated product; with ``degree`` only that homogeneous part is formed."""
        self._check(other)
        exact = self._combine_exact(other)
        A = sorted(self._store_for(exact, self._c).items(), key=lambda kv: sum(kv[0]))
        B = sorted(other._store_for(exact, other._c).items(), key=lambda kv: sum(kv[0]))
        top = self.maxdeg if degree is None else degree
        store: dict[tuple, object] = {}
        bdeg = [sum(b) for b, _ in B]
        for a, ca in A:
            da = sum(a)
            if da > top:
                break
            for (b, cb), db in zip(B, bdeg):
                s = da + db
                if s > top:
                    break
                if degree is not None and s != degree:
                    continue
                key = tuple(x + y for x, y in zip(a, b))
                v = store.get(key)
                p = ca * cb
                store[key] = p if v is None else v + p
        store = {k: v for k, v in store.items() if not _is_zero(v)}
        return self._wrap(self.nvars, self.maxdeg, store, exact)

    def __pow__(self, n: int) -> "Jet":
        if n < 0:
            raise ValueError("negative power")
        out = Jet.const(1, self.nvars, self.maxdeg)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def derive(self, var: int) -> "Jet":
        """Partial derivative in variable ``var`` (0-based)."""
        store = {}
        for a, c in self._c.items():
            k = a[var]
            if k:
                b = list(a)
                b[var] -= 1
                store[tuple(b)] = c * k
        return self._wrap(self.nvars, self.maxdeg, store, self.exact)

    def integrate(self, var: int) -> "Jet":
        """Antiderivative in ``var`` with zero integration constant, truncated."""
        store = {}
        for a, c in self._c.items():
            if sum(a) + 1 > self.maxdeg:
                continue
            b = list(a)
            b[var] += 1
            store[tuple(b)] = c / b[var]
        return self._wrap(self.nvars, self.maxdeg, store, self.exact)

    def restrict(self, var: int) -> "Jet":
        """Set variable ``var`` to zero (keeps nvars)."""
        return self._wrap(
            self.nvars, self.maxdeg, {a: c for a, c in self._c.items() if a[var] == 0}, self.exact
        )

    def drop_var(self, var: int) -> "Jet":
        """Restrict ``var`` to zero and remove it: a 3-variable jet becomes 2-variable."""
        if self.nvars != 3:
            raise ShapeError("drop_var needs a 3-variable jet")
        store = {
            tuple(x for k, x in enumerate(a) if k != var): c
            for a, c in self._c.items()
            if a[var] == 0
        }
        return self._wrap(2, self.maxdeg, store, self.exact)

    def embed(self, nvars: int = 3) -> "Jet":
        """View a 2-variable jet as a 3-variable jet independent of the last variable."""
        if self.nvars == nvars:
            return self
        store = {a + (0,) * (nvars - self.nvars): c for a, c in self._c.items()}
        return self._wrap(nvars, self.maxdeg, store, self.exact)

    def compose(self, subs: Sequence["Jet"]) -> "Jet":
        return jet_compose(self, subs)

    def __eq__(self, other):
        if isinstance(other, Jet):
            return (
                self.nvars == other.nvars
                and self.maxdeg == other.maxdeg
                and self._c == other._c
            )
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, self.maxdeg, frozenset(self._c)))

    # --- numerics ----------------------------------------------------------

    def __call__(self, *xs):
        """Evaluate numerically; arguments broadcast as numpy arrays."""
        xs = [np.asarray(x, dtype=complex) for x in xs]
        if len(xs) != self.nvars:
            raise ShapeError(f"expected {self.nvars} arguments")
        out = np.zeros(np.broadcast(*xs).shape, dtype=complex)
        for a, c in self._c.items():
            term = complex(c)
            for x, k in zip(xs, a):
                if k:
                    term = term * x**k
            out = out + term
        return out

    # --- text serialization -------------------------------------------------

    def to_text(self) -> str:
        """One term per line: exponents then ``re im`` as ``num/den``."""
        if not self.exact:
            raise DomainError("text serialization requires exact coefficients")
        lines = []
        for a in sorted(self._c, key=lambda a: (sum(a), a)):
            c = self._c[a]
            lines.append(" ".join(str(k) for k in a) + f" {_fmt_q(c.re)} {_fmt_q(c.im)}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, nvars: int, maxdeg: int) -> "Jet":
        coeffs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != nvars + 2:
                raise ShapeError(f"bad jet line {line!r}")
            alpha = tuple(int(p) for p in parts[:nvars])
            coeffs[alpha] = QQi(Fraction(parts[nvars]), Fraction(parts[nvars + 1]))
        return cls(nvars, maxdeg, coeffs)

    def __repr__(self):
        terms = []
        for a in sorted(self._c, key=lambda a: (sum(a), a)):
            mono = "*".join(
                f"x{k + 1}" + (f"^{e}" if e > 1 else "") for k, e in enumerate(a) if e
            ) or "1"
            terms.append(f"({self._c[a]!r})*{mono}")
        return f"Jet<{self.nvars},{self.maxdeg}>[" + " + ".join(terms) + "]"


def jet_arith(a: Jet, b: Jet | None = None, kind: str = "add", var: int | None = None, c=None) -> Jet:
    """Dispatch helper over the basic operations ``add | mul | derive | scale``."""
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    if kind == "derive":
        return a.derive(var)
    if kind == "scale":
        return a.scale(c)
    raise ValueError(f"unknown kind {kind!r}")


def jet_compose(f: Jet, subs: Sequence[Jet]) -> Jet:
    """Formal composition ``f(s_1, ..., s_n)`` truncated at the substitutions' maxdeg.

    Substitutions must have zero constant term; they may have a different
    number of variables than ``f`` (e.g. a 2-variable ``f`` fed 3-variable jets).
    """
    if len(subs) != f.nvars:
        raise ShapeError(f"need {f.nvars} substitutions, got {len(subs)}")
    nv, md = subs[0].nvars, subs[0].maxdeg
    for s in subs:
        if s.nvars != nv or s.maxdeg != md:
            raise ShapeError("substitution jets must share nvars and maxdeg")
        if (0,) * nv in s._c:
            raise DomainError("substitution has a nonzero constant term")
    top = min(f.maxdeg, md)
    # powers[k][e] = subs[k]**e, built lazily
    powers: list[list[Jet]] = [[Jet.const(1, nv, md)] for _ in subs]

    def power(k, e):
        while len(powers[k]) <= e:
            powers[k].append(powers[k][-1] * subs[k])
        return powers[k][e]

    # group monomials of f by leading exponents to share partial products
    out = Jet.zero(nv, md)
    cache: dict[tuple, Jet] = {(): Jet.const(1, nv, md)}

    def prefix(alpha: tuple) -> Jet:
        if alpha in cache:
            return cache[alpha]
        head = prefix(alpha[:-1])
        k = len(alpha) - 1
        val = head * power(k, alpha[-1]) if alpha[-1] else head
        cache[alpha] = val
        return val

    for alpha, c in sorted(f._c.items()):
        if sum(alpha) > top:
            continue
        out = out + prefix(alpha).scale(c)
    return out


# --- zeta/eta coordinates and the dbar solver -----------------------------------


def _zeta_eta_subs(nvars: int, maxdeg: int):
    """x-coordinates written in (zeta, eta[, x3]):  x1 = (zeta+eta)/2, x2 = (zeta-eta)/(2i)."""
    zeta = Jet.var(0, nvars, maxdeg)
    eta = Jet.var(1, nvars, maxdeg)
    x1 = (zeta + eta).scale(QQi(Fraction(1, 2)))
    x2 = (zeta - eta).scale(QQi(0, Fraction(-1, 2)))
    subs = [x1, x2]
    if nvars == 3:
        subs.append(Jet.var(2, 3, maxdeg))
    return subs


def _x_subs(nvars: int, maxdeg: int):
    """zeta = x1 + i x2, eta = x1 - i x2."""
    x1 = Jet.var(0, nvars, maxdeg)
    x2 = Jet.var(1, nvars, maxdeg)
    subs = [x1 + x2.scale(I), x1 - x2.scale(I)]
    if nvars == 3:
        subs.append(Jet.var(2, 3, maxdeg))
    return subs


def to_zeta_eta(f: Jet) -> Jet:
    """Rewrite ``f(x)`` as a series in ``(zeta, eta[, x3])``."""
    return jet_compose(f, _zeta_eta_subs(f.nvars, f.maxdeg))


def from_zeta_eta(g: Jet) -> Jet:
    """Inverse of :func:`to_zeta_eta`."""
    return jet_compose(g, _x_subs(g.nvars, g.maxdeg))


def dbar(f: Jet) -> Jet:
    """``(d/dx1 + i d/dx2) f / 2``."""
    return (f.derive(0) + f.derive(1).scale(I if f.exact else 1j)).scale(HALF if f.exact else 0.5)


def dbar_solve(g: Jet, gauge: str = "kill_zeta_pure") -> Jet:
    """Solve ``(d/dx1 + i d/dx2) f / 2 = g`` degree by degree.

    ``gauge="kill_zeta_pure"`` (default) returns the unique solution without any
    monomial ``zeta^a x3^c``; ``gauge="real"`` instead sets those free
    coefficients to the conjugates of the matching ``eta^a x3^c`` coefficients
    so that a real-valued solution is returned whenever one exists.  The
    degree-0 coefficient is zero in both gauges.  The identity holds through
    degree ``maxdeg - 1``.
    """
    if gauge not in ("kill_zeta_pure", "real"):
        raise ValueError(f"unknown gauge {gauge!r}")
    ge = to_zeta_eta(g)
    fe = ge.integrate(1)
    if gauge == "real":
        store = dict(fe._c)
        for a, c in list(fe._c.items()):
            if a[0] == 0 and a[1] >= 1:
                mirror = (a[1], 0) + a[2:]
                store[mirror] = c.conjugate()
        fe = Jet._wrap(fe.nvars, fe.maxdeg, store, fe.exact)
    return from_zeta_eta(fe)


def zeta_pure_part(f: Jet) -> Jet:
    """The component of ``f`` in the kernel of the dbar operator (series in zeta, x3)."""
    fe = to_zeta_eta(f)
    return from_zeta_eta(
        Jet._wrap(fe.nvars, fe.maxdeg, {a: c for a, c in fe._c.items() if a[1] == 0}, fe.exact)
    )


# --- vector fields -------------------------------------------------------------


def apply_field(field: Sequence[Jet], f: Jet, degree: int | None = None) -> Jet:
    """``sum_j field_j * d f / d x_j``."""
    out = Jet.zero(f.nvars, f.maxdeg)
    for j, c in enumerate(field):
        d = f.derive(j)
        if d.is_zero() or c.is_zero():
            continue
        out = out + c.mul(d, degree=degree)
    return out


def bracket(X: Sequence[Jet], Y: Sequence[Jet]) -> list[Jet]:
    """Lie bracket ``[X, Y]`` of two vector-field jets."""
    return [apply_field(X, Y[j]) - apply_field(Y, X[j]) for j in range(len(X))]


def monomials(nvars: int, maxdeg: int) -> Iterable[tuple]:
    for alpha in product(range(maxdeg + 1), repeat=nvars):
        if sum(alpha) <= maxdeg:
            yield alpha
