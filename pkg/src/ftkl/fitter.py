"""Least-squares fits to the boundary expansion basis and model-free exponent estimates.

Basis in ``x = -rho``: ``x^{-(2+2/r)+j/r}`` for ``j = 0..J`` and ``x^j log x`` for
``j = 0..J_log``.  Exponents are reported with the convention ``f ~ x^{-e}``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ftkl.errors import DomainError

MIN_X = 1e-8
RANK_TOL = 1e-13


def _as_xy(samples):
    if hasattr(samples, "rho") and hasattr(samples, "value"):
        rho, val = np.asarray(samples.rho, float), np.asarray(samples.value, float)
    else:
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or 2 not in arr.shape:
            raise DomainError("samples must be (rho, value) pairs")
        if arr.shape[1] != 2:
            arr = arr.T
        rho, val = arr[:, 0], arr[:, 1]
    if np.any(rho >= 0):
        raise DomainError("rho must be negative")
    return -rho, val


def basis_labels(r: int, J: int, J_log: int) -> list:
    labels = [f"x^({-(2 + 2 / r) + j / r:.6g})" for j in range(J + 1)]
    labels += [f"x^{j} log x" for j in range(J_log + 1)]
    return labels


def design_matrix(x: np.ndarray, r: int, J: int, J_log: int) -> np.ndarray:
    lead = -(2 + 2 / r)
    cols = [x ** (lead + j / r) for j in range(J + 1)]
    cols += [x**j * np.log(x) for j in range(J_log + 1)]
    return np.column_stack(cols)


@dataclass
class FitResult:
    r: int
    a: list
    b: list
    residual: float
    condition: float
    exponent_estimate: float | None
    J: int
    J_log: int
    n_samples: int
    rank_deficient: bool = False
    intervals: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def residual_csv(self, x) -> str:
        rows = ["x,relative_residual"]
        rows += [f"{float(xi)!r},{float(ri)!r}" for xi, ri in zip(x, self.residuals)]
        return "\n".join(rows) + "\n"


def fit_power_log(samples, r: int, J: int = 4, J_log: int = 1, min_x: float = MIN_X) -> FitResult:
    """Relative-weighted QR least squares in the power-log basis."""
    x, f = _as_xy(samples)
    keep = x >= min_x
    x, f = x[keep], f[keep]
    ncol = J + J_log + 2
    if len(x) < ncol:
        raise DomainError("not enough samples for the requested basis", n=len(x), need=ncol)
    if np.log10(x.max() / x.min()) < 2 - 1e-12:
        raise DomainError("samples must span at least two decades of -rho", span=float(np.log10(x.max() / x.min())))
    if np.any(f == 0):
        raise DomainError("zero sample values cannot be relatively weighted")
    A = design_matrix(x, r, J, J_log) / np.abs(f)[:, None]
    y = f / np.abs(f)
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    Q, R = np.linalg.qr(As)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    deficient = not (sv[-1] > RANK_TOL * sv[0])
    if not deficient:
        cs = np.linalg.solve(R, Q.T @ y)
    else:
        cs = np.linalg.lstsq(As, y, rcond=RANK_TOL)[0]
    coef = cs / scale
    res = As @ cs - y
    rel = float(np.abs(res).max())

    # error bars from the column-scaled system; unresolved directions -> unbounded
    _, s, Vt = np.linalg.svd(As, full_matrices=False)
    noise = max(float(np.sqrt(np.mean(res**2))), np.finfo(float).eps)
    ok = s > RANK_TOL * s[0]
    spread = np.sqrt(((Vt[ok].T / s[ok][None, :]) ** 2).sum(axis=1))
    if deficient:
        null = np.abs(Vt[~ok]).max(axis=0) > 1e-8
        spread = np.where(null, np.inf, spread)
    half = noise * spread / scale
    labels = basis_labels(r, J, J_log)
    intervals = {lab: (float(c - h), float(c + h)) for lab, c, h in zip(labels, coef, half)}

    try:
        expo = estimate_leading_exponent(np.column_stack([-x, f])).value
    except DomainError:
        expo = None
    return FitResult(
        r=r, a=[float(c) for c in coef[: J + 1]], b=[float(c) for c in coef[J + 1:]],
        residual=rel, condition=cond, exponent_estimate=expo, J=J, J_log=J_log,
        n_samples=len(x), rank_deficient=deficient, intervals=intervals,
        residuals=[float(v) for v in res],
    )


@dataclass
class ExponentEstimate:
    value: float
    uncertainty: float
    slopes: list
    accelerated: list
    warning: str | None = None


def _aitken(s: np.ndarray) -> np.ndarray:
    out = []
    for i in range(len(s) - 2):
        d1, d2 = s[i + 1] - s[i], s[i + 2] - 2 * s[i + 1] + s[i]
        if abs(d2) <= 1e-14 * max(abs(s[i + 2]), 1.0):
            out.append(s[i + 2])
        else:
            out.append(s[i] - d1 * d1 / d2)
    return np.array(out)


def estimate_leading_exponent(samples, min_x: float = MIN_X) -> ExponentEstimate:
    """Leading ``e`` in ``f ~ x^{-e}`` from successive log-log slopes, Aitken-accelerated."""
    x, f = _as_xy(samples)
    keep = x >= min_x
    x, f = x[keep], f[keep]
    if len(x) < 2:
        raise DomainError("need at least two samples")
    if np.any(f <= 0):
        raise DomainError("samples must be positive")
    order = np.argsort(-x, kind="stable")
    x, f = x[order], f[order]
    if np.any(np.diff(x) >= 0):
        raise DomainError("duplicate abscissae")
    lx, lf = np.log(x), np.log(f)
    slopes = -np.diff(lf) / np.diff(lx)
    warn = None
    if not (np.all(np.diff(f) > 0) or np.all(np.diff(f) < 0)):
        warn = "samples not monotone"
    if warn is not None:
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
        acc = slopes
    else:
        acc = _aitken(slopes) if len(slopes) >= 5 else slopes
    tail = acc[-3:]
    unc = float(tail.max() - tail.min()) if len(tail) > 1 else float("inf")
    return ExponentEstimate(float(acc[-1]), unc, [float(s) for s in slopes], [float(a) for a in acc], warn)
