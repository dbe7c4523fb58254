"""Acceptance suite behind ``ftkl accept``: one check per criterion, each with a CSV artifact."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import gamma, pi
from pathlib import Path

import numpy as np


@dataclass
class Check:
    number: int
    name: str
    passed: bool
    measured: dict
    csv: str = ""
    notes: list = field(default_factory=list)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{flag}] {self.number:>2} {self.name}: {brief}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    return "\n".join(lines) + "\n"


def check_model_constants() -> Check:
    from ftkl.fock import HomogeneousWeight, model_constant_c0

    rows, worst = [], 0.0
    for r in (2, 4, 6):
        c0 = model_constant_c0(HomogeneousWeight.radial_weight(r))
        exact = r * 2 ** (2 / r) / (2 * pi * gamma(2 / r))
        rel = abs(c0 - exact) / exact
        worst = max(worst, rel)
        rows.append((r, c0, exact, rel))
    return Check(1, "radial model constants", worst <= 1e-8, {"max_rel_err": worst},
                 _csv(["r", "c0", "closed_form", "rel_err"], rows))


def check_gaussian_kernel(nmax: int = 40) -> Check:
    from ftkl.fock import HomogeneousWeight, fock_basis

    b = fock_basis(HomogeneousWeight.radial_weight(2), 1.0, nmax)
    rad = np.linspace(0, 1, 5)
    zs = rad * np.exp(1j * np.linspace(0, 2 * pi, 5, endpoint=False) + 0.3j)
    ws = rad[::-1] * np.exp(1j * np.linspace(0, 2 * pi, 5, endpoint=False) - 0.7j)
    P = np.column_stack([zs.real, zs.imag])
    Q = np.column_stack([ws.real, ws.imag])
    K = b.kernel(P, Q) * np.exp(np.abs(zs)[:, None] ** 2 + np.abs(ws)[None, :] ** 2)
    exact = (2 / pi) * np.exp(2 * zs[:, None] * ws.conj()[None, :])
    err = np.abs(K - exact)
    rows = [(i, j, K[i, j].real, K[i, j].imag, err[i, j]) for i in range(5) for j in range(5)]
    return Check(2, "gaussian kernel", float(err.max()) <= 1e-10, {"max_abs_err": float(err.max()), "nmax": nmax},
                 _csv(["i", "j", "re", "im", "abs_err"], rows))


def check_scaling() -> Check:
    from ftkl.fock import ELLIPTIC_EXAMPLE, HomogeneousWeight, scaling_deviation

    rows, ok = [], True
    for r in (2, 4):
        rep = scaling_deviation(HomogeneousWeight.radial_weight(r), [1, 10, 100])
        ok &= rep.deviation <= 1e-8
        rows.append((f"radial_r{r}", rep.deviation, rep.err_est))
    rep = scaling_deviation(HomogeneousWeight.from_poly(ELLIPTIC_EXAMPLE), [1, 16])
    ok &= rep.deviation <= 1e-6
    rows.append(("elliptic_r4", rep.deviation, rep.err_est))
    return Check(3, "scaling law", ok, {"max_deviation": max(r[1] for r in rows)},
                 _csv(["weight", "deviation", "err_est"], rows))


def check_neumann() -> Check:
    from ftkl.fock import HomogeneousWeight, cubic_perturbation, neumann_corrected_kernel

    t = 4.0
    w = HomogeneousWeight.radial_weight(2).with_perturbation(cubic_perturbation(0.05, t, 2))
    res = neumann_corrected_kernel(w, t, N=3)
    d1, d3 = res.defects[1], res.defects[3]
    anti = max(res.anti_hermitian, res.anti_hermitian_matrix)
    ok = d3 < d1 and d3 < 1e-3 and anti <= res.err_est
    rows = [(n, d) for n, d in sorted(res.defects.items())]
    return Check(4, "neumann identity", ok,
                 {"delta_1": d1, "delta_3": d3, "anti_hermitian": anti, "err_est": res.err_est},
                 _csv(["N", "defect"], rows))


def check_spectral() -> Check:
    from ftkl.spectral import gap, gap_scaling

    rows, ok = [], True
    for t in (1.0, 5.0):
        g = gap(2, t)
        ok &= abs(g - 2 * t) <= 0.01 * 2 * t
        rows.append(("gap_r2", t, g))
    expo = {}
    for r, ts in ((2, [1, 10, 100]), (4, [1, 10, 100])):
        res = gap_scaling(r, ts)
        expo[r] = res.fitted_exponent
        ok &= abs(res.fitted_exponent - 2 / r) <= 0.02
        rows += [(f"scaling_r{r}", t, lam) for t, lam in zip(res.t_list, res.lambda_min_pos)]
    return Check(5, "spectral gap", ok, {"exponent_r2": expo[2], "exponent_r4": expo[4]},
                 _csv(["series", "t", "lambda_min_pos"], rows))


def check_egg() -> Check:
    from ftkl.egg import axis_leading_coefficient, boundary_samples
    from ftkl.fitter import estimate_leading_exponent, fit_power_log

    rho = -np.logspace(-1, -6, 21)
    rows, ok, measured = [], True, {}
    closed = {1: 2 / pi**2, 2: 3 / (2 * pi**2), 3: 3 * gamma(7 / 3) / (pi**2 * gamma(1 / 3))}
    for k in (1, 2, 3):
        S = boundary_samples(k, "degenerate", rho)
        e = estimate_leading_exponent(S)
        F = fit_power_log(S, 2 * k)
        a0_err = abs(F.a[0] - closed[k]) / closed[k]
        ok &= abs(e.value - (2 + 1 / k)) <= 1e-3 and a0_err <= 1e-4
        ok &= abs(axis_leading_coefficient(k) - closed[k]) <= 1e-12
        measured[f"k{k}_exp_err"] = abs(e.value - (2 + 1 / k))
        rows.append((f"degenerate_k{k}", e.value, F.a[0], a0_err))
    G = boundary_samples(2, "generic", -np.logspace(-2, -4, 9))
    eg = estimate_leading_exponent(G)
    ok &= abs(eg.value - 3) <= 1e-2
    measured["generic_exp"] = eg.value
    rows.append(("generic_k2", eg.value, "", ""))
    return Check(6, "egg expansions", ok, measured,
                 _csv(["series", "exponent", "a0", "a0_rel_err"], rows))


def check_bundle() -> Check:
    from ftkl.bundle import BundleMetric, degenerate_point_asymptotics, szego_density

    ms = [16, 32, 64, 128, 256, 512, 1024]
    rep = degenerate_point_asymptotics(4, ms)
    pref_err = abs(rep.prefactor - rep.prefactor_closed_form) / rep.prefactor_closed_form
    ok = abs(rep.exponent - 0.5) <= 1e-2 and pref_err <= 0.02 and rep.fock_identity["relative_gap"] <= 0.02
    worst = 0.0
    for m in (2, 5, 17, 64):
        for u in (0.0, 1.0):
            val = szego_density(BundleMetric(2, m), np.sqrt(u))
            exact = (m - 1) / (pi * (1 + u) ** 2)
            worst = max(worst, abs(val - exact) / exact)
    ok &= worst <= 1e-12
    rows = [(m, v) for m, v in zip(rep.m_list, rep.values)]
    return Check(7, "szego fourier modes", ok,
                 {"exponent": rep.exponent, "prefactor_rel_err": pref_err,
                  "fock_gap": rep.fock_identity["relative_gap"], "r2_rel_err": worst},
                 _csv(["m", "value"], rows))


def check_phase() -> Check:
    from ftkl.bundle import phase_factor, phase_factor_structural

    rows, ok = [], True
    for s in range(1, 7):
        for m in range(1, 101):
            want = s if m % s == 0 else 0
            a, b = phase_factor(s, m), phase_factor_structural(s, m)
            ok &= a == want and b == a
            rows.append((s, m, a, b))
    return Check(8, "phase factor", ok, {"cases": len(rows)}, _csv(["s", "m", "phase", "structural"], rows))


def check_normal_form() -> Check:
    from ftkl.jets import Jet
    from ftkl.normalform import ChristNormalFormData, normal_form

    d = ChristNormalFormData.build("x1**2 + x2**2")
    res = normal_form(d)
    target = Jet.from_poly("x1**2 + x2**2", 2, res.phi0.maxdeg)
    ok1 = res.phi0 == target and res.certified()
    d4 = ChristNormalFormData.build("x1**4", R=["x1/3 + x2*x3/2", "x2**2", "5*x3*x1/7"])
    res4 = normal_form(d4)
    worst = max(res4.residuals.values())
    ok = ok1 and worst == 0 and res4.certified()
    rows = [("x1^2+x2^2", k, v) for k, v in sorted(res.residuals.items())]
    rows += [("x1^4", k, v) for k, v in sorted(res4.residuals.items())]
    return Check(9, "normal form", ok, {"phi0_exact": ok1, "max_residual_r4": worst, "order": res4.order},
                 _csv(["case", "certificate", "max_abs_coeff"], rows))


CHECKS = [
    check_model_constants, check_gaussian_kernel, check_scaling, check_neumann, check_spectral,
    check_egg, check_bundle, check_phase, check_normal_form,
]


def artifact_name(check: Check) -> str:
    return f"criterion_{check.number:02d}.csv"


def run_suite(outdir: Path | None = None, echo=print) -> list[Check]:
    """Run checks 1-9, write their CSVs, then check byte-determinism (criterion 10)."""
    results = []
    for fn in CHECKS:
        try:
            c = fn()
        except Exception as exc:  # a crashing criterion is a failed criterion
            n = CHECKS.index(fn) + 1
            c = Check(n, fn.__name__.removeprefix("check_").replace("_", " "), False,
                      {"error": f"{type(exc).__name__}: {exc}"})
        results.append(c)
        echo(c.line())
    digests = {}
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        for c in results:
            if c.csv:
                path = outdir / artifact_name(c)
                path.write_bytes(c.csv.encode("utf-8"))
                digests[path.name] = hashlib.sha256(c.csv.encode()).hexdigest()
    # determinism: regenerate the cheap artifacts and compare bytes
    again = [check_model_constants(), check_gaussian_kernel(), check_phase(), check_neumann()]
    same = all(a.csv == next(c.csv for c in results if c.number == a.number) for a in again)
    c10 = Check(10, "determinism", same, {"regenerated": len(again)})
    results.append(c10)
    echo(c10.line())
    if outdir is not None:
        manifest = "".join(f"{k},{v}\n" for k, v in sorted(digests.items()))
        (outdir / "sha256.csv").write_bytes(("file,sha256\n" + manifest).encode())
    return results
