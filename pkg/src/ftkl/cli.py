"""``ftkl`` command line: experiment configs in, CSV/JSON artifacts out.

Precedence is defaults < ``--config`` file < flags.  Exit codes: 0 success,
1 certification failure, 2 usage error, 3 accuracy error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ftkl.errors import AccuracyError, CertificationError, FtklError

EXIT_OK, EXIT_CERT, EXIT_USAGE, EXIT_ACCURACY = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --- typed parameters


def floatlist(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def intlist(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def positive(conv):
    def f(text):
        v = conv(text)
        vals = v if isinstance(v, list) else [v]
        if not vals or any(x <= 0 for x in vals):
            raise ValueError(f"must be positive: {text}")
        return v

    f.__name__ = conv.__name__
    return f


def remainder_arg(text: str) -> str:
    """``none``, a file with one component per line, or inline ``r1;r2;r3``."""
    text = str(text).strip()
    if text.lower() in ("", "none", "0"):
        return ""
    path = Path(text)
    if path.is_file():
        lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
        return ";".join(ln for ln in lines if ln and not ln.startswith("#"))
    return text


def at_least(lo: int):
    def f(text):
        v = int(text)
        if v < lo:
            raise ValueError(f"must be >= {lo}: {text}")
        return v

    f.__name__ = "int"
    return f


@dataclass(frozen=True)
class Param:
    name: str
    conv: Callable
    default: Any
    help: str
    choices: tuple | None = None
    tolerance: bool = False


COMMON = [
    Param("output", str, None, "output path (default: stdout)"),
    Param("format", str, "json", "artifact format", ("csv", "json")),
    Param("seed", int, 0, "seed for randomized grids (all built-in grids are deterministic)"),
]

PARAMS: dict[str, list[Param]] = {
    "normalform": [
        Param("p", str, "x1**2 + x2**2", "homogeneous polynomial p(x1, x2)"),
        Param("R", remainder_arg, "none", "remainder: none, a file (one component per line) or r1;r2;r3"),
        Param("order", at_least(1), None, "certified order N (default 2r)"),
        Param("gauge", str, "real", "potential gauge", ("real", "kill_zeta_pure")),
    ],
    "fock": [
        Param("r", at_least(2), 2, "weight degree"),
        Param("phi0", str, "", "homogeneous weight polynomial in p1, p2 (default |p|^r)"),
        Param("t", positive(float), 1.0, "scale t"),
        Param("nmax", at_least(1), 40, "maximal monomial degree"),
        Param("radius", positive(float), 1.0, "half-width of the sample grid"),
        Param("points", at_least(1), 3, "grid points per axis"),
    ],
    "scaling": [
        Param("r", at_least(2), 4, "weight degree"),
        Param("phi0", str, "", "homogeneous weight polynomial in p1, p2 (default |p|^r)"),
        Param("t", positive(floatlist), [1.0, 16.0, 256.0], "comma-separated scales"),
        Param("nmax", at_least(1), 48, "maximal monomial degree"),
        Param("radius", positive(float), 1.0, "radius of the polar sample grid"),
    ],
    "neumann": [
        Param("r", at_least(2), 2, "weight degree"),
        Param("t", positive(float), 4.0, "scale t"),
        Param("eps", float, 0.05, "cubic perturbation strength"),
        Param("N", at_least(1), 3, "number of Neumann terms"),
        Param("nmax", at_least(1), 40, "maximal monomial degree"),
        Param("cutoff", float, None, "cutoff radius R0 (default 3 t^(-1/r))"),
        Param("quad_tol", positive(float), 1e-12, "quadrature doubling tolerance", tolerance=True),
    ],
    "spectral": [
        Param("r", at_least(2), 2, "weight degree"),
        Param("t", positive(floatlist), [1.0], "comma-separated scales"),
        Param("L", at_least(1), 20, "sector range |l| <= L"),
        Param("mesh", at_least(4), 400, "radial cells per sector"),
        Param("zero_threshold", positive(float), 1e-6, "zero-mode threshold (times t^(2/r))", tolerance=True),
    ],
    "egg": [
        Param("k", at_least(1), 2, "egg exponent k"),
        Param("point", str, "degenerate", "boundary point", ("degenerate", "generic")),
        Param("rho_decades", at_least(2), 4, "decades of -rho below 1e-1"),
        Param("per_decade", at_least(1), 4, "samples per decade"),
        Param("v", positive(float), 0.25, "|z2|^2 at the generic base point"),
        Param("fit_J", at_least(0), 4, "power terms in the fit"),
        Param("fit_J_log", at_least(0), 1, "log terms in the fit"),
    ],
    "fit": [
        Param("input", str, None, "CSV with columns rho,value (required)"),
        Param("r", at_least(2), 2, "type parameter of the exponent ladder"),
        Param("J", at_least(0), 4, "power terms"),
        Param("J_log", at_least(0), 1, "log terms"),
        Param("min_x", positive(float), 1e-8, "reject samples with -rho below this", tolerance=True),
    ],
    "bundle": [
        Param("r", at_least(2), 4, "vanishing parameter r"),
        Param("mode", str, "degenerate", "computation", ("degenerate", "psc", "phase")),
        Param("m", positive(intlist), [16, 32, 64, 128, 256, 512, 1024], "comma-separated tensor powers"),
        Param("u", float, 1.0, "|w|^2 for mode=psc"),
        Param("smax", at_least(1), 6, "largest stabilizer order for mode=phase"),
    ],
    "accept": [
        Param("outdir", str, "accept_artifacts", "directory for CSV artifacts"),
    ],
}

REQUIRED = {"fit": ["input"]}


@dataclass
class ExperimentConfig:
    command: str
    parameters: dict
    output: str | None
    format: str
    seed: int
    tolerances: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "tolerances": self.tolerances,
            "output": self.output,
            "format": self.format,
            "seed": self.seed,
        }


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftkl",
        description="Model Bergman kernels, normal forms and spectral gaps at finite-type points.",
        epilog="Exit codes: 0 ok, 1 certification failure, 2 usage error, 3 accuracy error. "
        "FTKL_THREADS caps the worker pool.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for cmd, params in PARAMS.items():
        p = sub.add_parser(cmd, help=f"run {cmd}", argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value config file")
        for prm in params + COMMON:
            default = prm.default if not isinstance(prm.default, list) else ",".join(map(str, prm.default))
            extra = f" (choices: {', '.join(prm.choices)})" if prm.choices else ""
            flags = [_flag(prm.name)] + (["--out"] if prm.name == "output" else [])
            p.add_argument(*flags, dest=prm.name, metavar=prm.name.upper(),
                           help=f"{prm.help}{extra} [default: {default}]")
    return parser


def read_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def parse_config(argv: list[str]) -> ExperimentConfig:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError("invalid command line") from exc
    if not getattr(ns, "command", None):
        parser.print_help(sys.stderr)
        raise UsageError("missing command")
    cmd = ns.command
    params = {p.name: p for p in PARAMS[cmd] + COMMON}
    raw: dict = {}
    if getattr(ns, "config", None):
        filed = read_config_file(ns.config)
        filed.pop("command", None) if filed.get("command") in (None, cmd) else None
        unknown = sorted(set(filed) - set(params))
        if unknown:
            raise UsageError(f"unknown keys in config file: {', '.join(unknown)}")
        raw.update(filed)
    for name in params:
        if hasattr(ns, name):
            raw[name] = getattr(ns, name)
    values = {}
    for name, prm in params.items():
        if name in raw and raw[name] is not None:
            try:
                v = prm.conv(raw[name])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {name}: {exc}") from exc
            if prm.choices and v not in prm.choices:
                raise UsageError(f"{name} must be one of {', '.join(prm.choices)}")
            values[name] = v
        else:
            values[name] = prm.default
    for name in REQUIRED.get(cmd, []):
        if values.get(name) is None:
            raise UsageError(f"missing required parameter {name}")
    common = {k: values.pop(k) for k in ("output", "format", "seed")}
    tol = {p.name: values[p.name] for p in PARAMS[cmd] if p.tolerance}
    return ExperimentConfig(cmd, values, common["output"], common["format"], common["seed"], tol)


# --- helpers


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FTKL_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map over parameter points; results come back in input order."""
    items = list(items)
    n = min(thread_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def csv_text(header, rows) -> str:
    def cell(x):
        if isinstance(x, (bool, np.bool_)):
            return str(bool(x))
        if isinstance(x, (float, np.floating)):
            return repr(float(x))
        return str(x)

    return "\n".join([",".join(header)] + [",".join(cell(x) for x in row) for row in rows]) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class Outcome:
    results: dict
    certificates: dict
    csv: str
    certified: bool = True


def _weight(r: int, phi0: str):
    from ftkl.fock import HomogeneousWeight

    if phi0:
        return HomogeneousWeight.from_poly(phi0, r=r)
    return HomogeneousWeight.radial_weight(r)


# --- commands


def run_normalform(p: dict) -> Outcome:
    from ftkl.normalform import ChristNormalFormData, normal_form

    given = remainder_arg(p["R"])
    R = [c.strip() or "0" for c in given.split(";")] if given else None
    if R is not None and len(R) != 3:
        raise UsageError("R needs three semicolon-separated components")
    data = ChristNormalFormData.build(p["p"], R=R, order=p["order"])
    data.validate()
    res = normal_form(data, gauge=p["gauge"])
    rows = [line.split() for line in res.phi0.to_text().splitlines()]
    header = [f"a{i + 1}" for i in range(res.phi0.nvars)] + ["re", "im"]
    out = res.to_json()
    certs = {"residuals": out.pop("residuals"), "checks": out.pop("checks")}
    return Outcome(out, certs, csv_text(header, rows), res.certified())


def run_fock(p: dict) -> Outcome:
    from ftkl.fock import bergman_eval, fock_basis

    w = _weight(p["r"], p["phi0"])
    basis = fock_basis(w, p["t"], p["nmax"])
    x = np.linspace(-p["radius"], p["radius"], p["points"])
    grid = [(a, b) for a in x for b in x]
    rows, worst_herm, warns = [], 0.0, 0
    for P in grid:
        for Q in grid:
            kv = bergman_eval(basis, w, p["t"], P, Q)
            rows.append((P[0], P[1], Q[0], Q[1], kv.value.real, kv.value.imag, kv.err_est))
            warns += kv.warning is not None
    K = basis.kernel(np.array(grid), np.array(grid))
    worst_herm = float(np.abs(K - K.conj().T).max())
    diag_min = float(np.diag(K).real.min())
    certs = {
        "conjugate_symmetry": worst_herm,
        "diagonal_min": diag_min,
        "orthonormality_defect": basis.quad.get("orthonormality_defect"),
        "err_est": basis.err_est,
        "truncation_warnings": warns,
    }
    ok = worst_herm <= 10 * basis.err_est * max(1.0, float(np.abs(K).max())) + 1e-14 and diag_min >= -basis.err_est
    results = {"weight": w.describe(), "t": p["t"], "nmax": p["nmax"], "quad": basis.quad,
               "B00": float(K[len(grid) // 2, len(grid) // 2].real) if p["points"] % 2 else None}
    return Outcome(results, certs, csv_text(["p1", "p2", "q1", "q2", "re", "im", "err"], rows), ok)


def run_scaling(p: dict) -> Outcome:
    from ftkl.fock.kernel import polar_grid, scaling_deviation

    w = _weight(p["r"], p["phi0"])
    grid = polar_grid(p["radius"])
    reports = ordered_map(lambda t: (t, scaling_deviation(w, [t], grid, p["nmax"])), sorted(set(p["t"])))
    dev = max(rep.deviation for _, rep in reports)
    err = max(rep.err_est for _, rep in reports)
    rows = [(t, rep.deviation, rep.err_est) for t, rep in reports]
    certs = {"max_deviation": dev, "err_est": err, "bounded_by_err_est": dev <= err}
    return Outcome({"weight": w.describe(), "t": sorted(set(p["t"])), "deviation": dev},
                   certs, csv_text(["t", "deviation", "err_est"], rows), dev <= err)


def run_neumann(p: dict) -> Outcome:
    from ftkl.fock import HomogeneousWeight, cubic_perturbation, neumann_corrected_kernel

    w = HomogeneousWeight.radial_weight(p["r"]).with_perturbation(
        cubic_perturbation(p["eps"], p["t"], p["r"], p["cutoff"])
    )
    res = neumann_corrected_kernel(w, p["t"], N=p["N"], nmax=p["nmax"], tol=p["quad_tol"])
    d = [res.defects[n] for n in sorted(res.defects)]
    mono = all(b <= a + res.err_est for a, b in zip(d, d[1:]))
    anti = max(res.anti_hermitian, res.anti_hermitian_matrix)
    certs = {"defects_nonincreasing": mono, "anti_hermitian": anti, "err_est": res.err_est}
    diag = dict(res.diagnostics)
    diag.pop("history", None)
    return Outcome({"defects": res.defects, "diagnostics": diag}, certs,
                   csv_text(["N", "defect"], sorted(res.defects.items())), mono and anti <= res.err_est)


def run_spectral(p: dict) -> Outcome:
    from ftkl.spectral import Mesh, gap, gap_scaling

    mesh = Mesh(p["mesh"])
    ts = sorted(set(p["t"]))
    gaps = ordered_map(lambda t: gap(p["r"], t, p["L"], mesh, p["zero_threshold"], detail=True), ts)
    res = {"r": p["r"], "t": ts, "lambda_min_pos": [g.value for g in gaps],
           "sector": [g.sector for g in gaps], "mesh_shift": [g.mesh_shift for g in gaps]}
    if len(ts) >= 2:
        fit = gap_scaling(p["r"], ts, p["L"], mesh)
        res.update(fitted_exponent=fit.fitted_exponent, c1_estimate=fit.c1_estimate, fit=fit.diagnostics)
    zero_ok = all(all(nz == 0 for ell, nz in g.zero_modes.items() if ell < 0) for g in gaps)
    certs = {"zero_modes_only_nonnegative_sectors": zero_ok, "positive": all(g.value > 0 for g in gaps)}
    rows = [(t, g.value) for t, g in zip(ts, gaps)]
    return Outcome(res, certs, csv_text(["t", "lambda_min_pos"], rows), zero_ok and certs["positive"])


def run_egg(p: dict) -> Outcome:
    from ftkl.egg import boundary_samples
    from ftkl.fitter import estimate_leading_exponent, fit_power_log

    n = p["rho_decades"] * p["per_decade"]
    rho = -(10.0 ** (-1 - np.arange(n + 1) / p["per_decade"]))
    S = boundary_samples(p["k"], p["point"], rho, v=p["v"])
    r = S.type
    e = estimate_leading_exponent(S)
    F = fit_power_log(S, r, p["fit_J"], p["fit_J_log"])
    results = {
        "k": p["k"], "point": p["point"], "type": r, "base": list(S.base),
        "exponent": e.value, "exponent_uncertainty": e.uncertainty, "expected_exponent": 2 + 2 / r,
        "fit": F.to_json(), "defining_function": "|z1|^2 + |z2|^(2k) - 1",
    }
    certs = {"max_relative_tail": float(np.max(S.tail_bound / S.value))}
    return Outcome(results, certs, S.to_csv(), True)


def run_fit(p: dict) -> Outcome:
    from ftkl.fitter import estimate_leading_exponent, fit_power_log

    try:
        lines = Path(p["input"]).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {p['input']}: {exc}") from exc
    header = [h.strip() for h in lines[0].split(",")]
    if "rho" not in header or "value" not in header:
        raise UsageError("input CSV needs rho and value columns")
    i, j = header.index("rho"), header.index("value")
    rows = [ln.split(",") for ln in lines[1:] if ln.strip()]
    try:
        data = np.array([[float(r[i]), float(r[j])] for r in rows])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"bad row in {p['input']}: {exc}") from exc
    F = fit_power_log(data, p["r"], p["J"], p["J_log"], p["min_x"])
    e = estimate_leading_exponent(data, p["min_x"])
    x = -data[:, 0]
    x = x[x >= p["min_x"]]
    return Outcome({"fit": F.to_json(), "exponent": e.value, "exponent_uncertainty": e.uncertainty},
                   {"residual": F.residual, "condition": F.condition}, F.residual_csv(x), True)


def run_bundle(p: dict) -> Outcome:
    from ftkl.bundle import (
        CONVENTION,
        BundleMetric,
        degenerate_point_asymptotics,
        phase_factor,
        phase_factor_structural,
        strongly_psc_coefficients,
    )

    ms = sorted(set(p["m"]))
    if p["mode"] == "degenerate":
        rep = degenerate_point_asymptotics(p["r"], ms)
        res = {"exponent": rep.exponent, "exponent_uncertainty": rep.exponent_uncertainty,
               "prefactor": rep.prefactor, "prefactor_closed_form": rep.prefactor_closed_form,
               "fock_identity": rep.fock_identity, "convention": CONVENTION}
        return Outcome(res, {"fock_relative_gap": rep.fock_identity["relative_gap"]}, rep.to_csv(), True)
    if p["mode"] == "psc":
        c = strongly_psc_coefficients(BundleMetric(p["r"], 1), np.sqrt(p["u"]), ms)
        res = {"c0_hat": c.c0_hat, "c1_hat": c.c1_hat, "c0_expected": c.c0_expected, "convention": CONVENTION}
        rows = list(zip(c.m_list, c.values))
        return Outcome(res, {"fit_residual": c.residual}, csv_text(["m", "value"], rows), True)
    rows, ok = [], True
    for s in range(1, p["smax"] + 1):
        for m in ms:
            a, b = phase_factor(s, m), phase_factor_structural(s, m, r=p["r"])
            ok &= a == b
            rows.append((s, m, a, b))
    return Outcome({"cases": len(rows)}, {"structural_agrees": ok},
                   csv_text(["s", "m", "phase", "structural"], rows), ok)


def run_accept(p: dict) -> Outcome:
    from ftkl.acceptance import run_suite

    checks = run_suite(Path(p["outdir"]), echo=lambda line: print(line, file=sys.stderr))
    rows = [(c.number, c.name, c.passed) for c in checks]
    res = {"checks": [{"number": c.number, "name": c.name, "passed": c.passed, "measured": c.measured}
                      for c in checks]}
    ok = all(c.passed for c in checks)
    return Outcome(res, {"all_passed": ok}, csv_text(["criterion", "name", "passed"], rows), ok)


RUNNERS = {
    "normalform": run_normalform, "fock": run_fock, "scaling": run_scaling, "neumann": run_neumann,
    "spectral": run_spectral, "egg": run_egg, "fit": run_fit, "bundle": run_bundle, "accept": run_accept,
}


def _emit(cfg: ExperimentConfig, text: str) -> None:
    if cfg.output:
        path = Path(cfg.output)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.buffer.write(text.encode("utf-8"))
        sys.stdout.flush()


def execute(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    try:
        out = RUNNERS[cfg.command](cfg.parameters)
    except UsageError:
        raise
    except CertificationError as exc:
        _fail(cfg, exc, EXIT_CERT)
        return EXIT_CERT
    except AccuracyError as exc:
        _fail(cfg, exc, EXIT_ACCURACY)
        return EXIT_ACCURACY
    except FtklError as exc:
        _fail(cfg, exc, EXIT_USAGE)
        return EXIT_USAGE
    elapsed = time.perf_counter() - t0
    if cfg.format == "csv":
        _emit(cfg, out.csv)
    else:
        env = {
            "config": cfg.resolved(),
            "results": out.results,
            "certificates": {**out.certificates, "certified": out.certified},
            "timings": {"seconds": elapsed},
        }
        _emit(cfg, json.dumps(_jsonable(env), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if out.certified else EXIT_CERT


def _fail(cfg: ExperimentConfig, exc: FtklError, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
               "diagnostics": exc.diagnostics, "config": cfg.resolved()}
    print(json.dumps(_jsonable(payload), sort_keys=True, default=str), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return execute(cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"ftkl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
