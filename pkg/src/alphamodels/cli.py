"""Command line: ``alphamodels {run,sweep,identities}``.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 hypothesis
failure, 5 numerical abort, 6 assertion failure (a checked inequality,
identity or sweep criterion did not hold).
"""

from __future__ import annotations

import argparse
import io
import csv
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from alphamodels import __version__, _kernels
from alphamodels.bounds import (
    DataNorms,
    HypothesisError,
    bound_report,
    brezis_gallouet_battery,
    compute_constants,
    dumps,
    hypothesis_box,
    filter_gain_check,
)
from alphamodels.experiments import SweepSpec, default_physics, run_sweep
from alphamodels.integrator import simulate
from alphamodels.models import ConfigError, ModelKind, NumericalAbort, SimConfig, energy_balance_terms
from alphamodels.nonlinear import advective_B, convolution_oracle, identity_suite, rotational_B
from alphamodels.spectral import build_lattice, random_field, weyl_constant

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_HYPOTHESIS = 4
EXIT_NUMERIC = 5
EXIT_ASSERTION = 6

RUN_CSV_SCHEMA = "alphamodels-run-csv v1"


class AssertionFailure(RuntimeError):
    pass


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------


class Manifest:
    def __init__(self, out: Path, command: str, resolved: dict):
        self.path = out / "manifest.json"
        self.data = {
            "tool": "alphamodels",
            "version": __version__,
            "command": command,
            "resolved_config": resolved,
            "platform": {
                "python": platform.python_version(),
                "machine": platform.machine(),
                "system": platform.platform(),
                "numpy": np.__version__,
                "kernel_backend": _kernels.BACKEND,
            },
            "status": "running",
            "outputs": {},
        }
        self._start = time.perf_counter()
        self.write()

    def write(self):
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")

    def output(self, key: str, path: Path):
        self.data["outputs"][key] = str(path)

    def finish(self, status: str, **extra):
        self.data["status"] = status
        self.data["wall_seconds"] = time.perf_counter() - self._start
        self.data.update(extra)
        self.write()


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError({"config": f"no such file {path}"}) from None
    except json.JSONDecodeError as exc:
        raise ConfigError({"config": f"invalid JSON: {exc}"}) from None
    if not isinstance(data, dict):
        raise ConfigError({"config": "top level must be an object"})
    return data


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def _run_csv(traj) -> str:
    buf = io.StringIO()
    buf.write(f"# {RUN_CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "l2", "h1", "h2", "linf", "model_energy", "dissipation", "production", "balance_residual"])
    cfg = traj.config
    for i, t in enumerate(traj.times):
        terms = energy_balance_terms(cfg.model, traj.state(i), cfg, float(t))
        w.writerow([repr(float(t))] + [repr(float(traj.norms[k][i])) for k in ("l2", "h1", "h2", "linf")] + [
            repr(float(terms[k])) for k in ("model_energy", "dissipation", "production", "residual")
        ])
    return buf.getvalue()


def cmd_run(args) -> int:
    raw = _load_json(args.config)
    theorem_checks = bool(raw.pop("theorem_checks", False))
    c_cal = float(raw.pop("c_cal", 1.0))
    cfg = SimConfig.from_dict(raw)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, "run", {**cfg.to_dict(), "theorem_checks": theorem_checks, "c_cal": c_cal})
    if theorem_checks and cfg.model.filtered:
        h = hypothesis_box(cfg.box_length, cfg.alpha)
        if not h.holds:
            man.finish("hypothesis_failure", detail=h.detail)
            raise HypothesisError(h.detail)
    traj = simulate(cfg)
    csv_path = out / "trajectory.csv"
    csv_path.write_text(_run_csv(traj))
    man.output("trajectory", csv_path)
    constants = compute_constants(cfg, DataNorms.from_config(cfg), c_cal)
    report = bound_report(traj, constants)
    rep_path = out / "bound_report.json"
    rep_path.write_text(dumps(report) + "\n")
    man.output("bound_report", rep_path)
    ok = report["apriori"]["passed"] and (not theorem_checks or report.get("linfty", {"passed": True})["passed"])
    man.finish("ok" if ok else "assertion_failure", steps=traj.steps)
    if not ok:
        raise AssertionFailure("a priori estimate violated; see bound_report.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

_SPEC_KEYS = {
    "values",
    "models",
    "reference_factor",
    "richardson",
    "temporal_tol",
    "calibration_seeds",
    "calibration_reference_factor",
    "calibration_safety",
    "c_cal",
    "fixed_alpha",
    "proxy_check",
}


def build_spec(kind: str, raw: dict, parallel: int, seed: int | None) -> SweepSpec:
    raw = dict(raw)
    base_raw = raw.pop("base", {})
    unknown = sorted(set(raw) - _SPEC_KEYS)
    if unknown:
        raise ConfigError({k: "unknown sweep field" for k in unknown})
    base = default_physics()
    if base_raw:
        merged = base.to_dict()
        merged.update(base_raw)
        base = SimConfig.from_dict(merged)
    if seed is not None:
        base = base.with_(seed=seed)
    if "values" in raw and len(raw["values"]) == 0:
        raise UsageError("empty value list")
    for key in ("calibration_seeds", "models", "values"):
        if key in raw:
            raw[key] = tuple(raw[key])
    factory = {"alpha": SweepSpec.default_alpha, "galerkin": SweepSpec.default_galerkin, "combined": SweepSpec.default_combined}[kind]
    values = raw.pop("values", None)
    try:
        spec = factory(base, parallel=parallel, **raw)
        if values is not None:
            from dataclasses import replace

            spec = replace(spec, values=values)
    except ValueError as exc:
        raise ConfigError({"sweep": str(exc)}) from None
    return spec


def cmd_sweep(args) -> int:
    raw = _load_json(args.config)
    spec = build_spec(args.kind, raw, args.parallel, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, f"sweep {args.kind}", {"kind": args.kind, "base": spec.base.to_dict(), "values": list(spec.values), "parallel": args.parallel})
    try:
        result = run_sweep(args.kind, spec)
    except HypothesisError as exc:
        man.finish("hypothesis_failure", detail=str(exc))
        raise
    csv_path = out / f"sweep_{args.kind}.csv"
    csv_path.write_text(result.to_csv())
    js_path = out / f"sweep_{args.kind}.json"
    js_path.write_text(result.to_json() + "\n")
    man.output("csv", csv_path)
    man.output("summary", js_path)
    if args.svg:
        from alphamodels.svg import sweep_svg

        svg_path = out / f"sweep_{args.kind}.svg"
        svg_path.write_text(sweep_svg(result))
        man.output("svg", svg_path)
    man.finish("ok" if result.passed else "assertion_failure")
    if not result.passed:
        raise AssertionFailure(f"{args.kind} sweep criteria failed; see {js_path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------

_ID_KEYS = {"box_length", "resolution", "trials", "seed", "padding", "stability_resolutions", "oracle_resolution", "alphas", "bg_fields"}


def identities_battery(raw: dict, seed_override: int | None = None) -> dict:
    unknown = sorted(set(raw) - _ID_KEYS)
    if unknown:
        raise ConfigError({k: "unknown identities field" for k in unknown})
    L = float(raw.get("box_length", 2 * math.pi))
    N = int(raw.get("resolution", 32))
    trials = raw.get("trials", 100)
    if not isinstance(trials, int) or trials < 1:
        raise UsageError("trials must be a positive integer")
    seed = int(seed_override if seed_override is not None else raw.get("seed", 0))
    padding = bool(raw.get("padding", True))
    stab = [int(n) for n in raw.get("stability_resolutions", [32, 64])]
    try:
        lat = build_lattice(L, N)
        lats = [build_lattice(L, n) for n in stab]
        olat = build_lattice(L, int(raw.get("oracle_resolution", 16)))
    except ValueError as exc:
        raise ConfigError({"lattice": str(exc)}) from None
    rep = identity_suite(lat, trials, seed, padding)
    # fast path against the direct sum
    ss = np.random.SeedSequence(seed + 1)
    worst = 0.0
    for child in ss.spawn(10):
        s1, s2 = (int(x) for x in child.generate_state(2))
        u, w = random_field(olat, s1), random_field(olat, s2)
        for form, fn in (("advective", advective_B), ("rotational", rotational_B)):
            fast = fn(u, w)
            orc = convolution_oracle(u, w, form)
            worst = max(worst, float(np.abs(fast.hat - orc.hat).max() / np.abs(orc.hat).max()))
    suites = [identity_suite(l, max(10, trials // 5), seed, padding) for l in lats]
    const_stab = {
        k: (min(s.constants[k] for s in suites), max(s.constants[k] for s in suites)) for k in rep.constants
    }
    alphas = raw.get("alphas", [L / (8 * math.pi), L / (2 * math.pi), 1.0, 0.5, 0.05])
    gains = [filter_gain_check(l, float(a), trials=20, seed=seed) for l in [lat] + lats for a in alphas]
    fields = int(raw.get("bg_fields", 200))
    bg = [brezis_gallouet_battery(l, fields, seed) for l in lats]
    bg_change = abs(bg[-1]["max_ratio"] - bg[0]["max_ratio"]) / bg[0]["max_ratio"]
    weyl = {n: weyl_constant(build_lattice(L, n)) for n in (16, 32, 64)}
    wv = list(weyl.values())
    weyl_change = (max(wv) - min(wv)) / min(wv)
    checks = {
        "exact_identities": rep.passed(1e-12),
        "oracle_agreement": worst <= 1e-12,
        "constants_finite": all(math.isfinite(v) for s in suites + [rep] for v in s.constants.values()),
        "filter_gain": all(r["bound_holds"] and r["pairing_holds"] for r in gains),
        "brezis_gallouet_stable": bool(bg_change < 0.2 and all(math.isfinite(b["max_ratio"]) for b in bg)),
        "weyl_stable": bool(weyl_change <= 0.1),
    }
    return {
        "identity_suite": rep.as_dict(),
        "oracle": {"resolution": olat.N, "max_relative_error": worst},
        "constant_ranges": {k: list(v) for k, v in const_stab.items()},
        "filter_gain": gains,
        "brezis_gallouet": {"batteries": bg, "relative_change": bg_change},
        "weyl": {"c0": {str(k): v for k, v in weyl.items()}, "relative_spread": weyl_change},
        "checks": checks,
        "passed": all(checks.values()),
        "worst_case": {k: {"trial": rep.worst_trial[k], "seed": seed} for k in rep.violations},
    }


def cmd_identities(args) -> int:
    raw = _load_json(args.config)
    if args.trials is not None:
        raw["trials"] = args.trials
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, "identities", raw)
    report = identities_battery(raw, args.seed)
    path = out / "identities.json"
    path.write_text(dumps(report) + "\n")
    man.output("report", path)
    man.finish("ok" if report["passed"] else "assertion_failure")
    if not report["passed"]:
        failed = [k for k, v in report["checks"].items() if not v]
        worst = {k: report["identity_suite"]["violations"][k] for k in report["identity_suite"]["violations"]}
        raise AssertionFailure(f"failed: {failed}; violations {worst}; seed {report['identity_suite']['seed']}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alphamodels", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"alphamodels {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="JSON configuration file")
        sp.add_argument("--out", metavar="DIR", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the configuration seed")
        sp.add_argument("--svg", action="store_true", help="also write an SVG plot (sweeps)")
        sp.add_argument("--parallel", type=_positive_int, default=os.cpu_count() or 1, metavar="N", help="worker processes for sweep points")

    sp = sub.add_parser("run", help="integrate one configuration and check its a priori estimates")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="convergence sweep in alpha, cutoff, or both")
    sp.add_argument("kind", choices=("alpha", "galerkin", "combined"))
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("identities", help="bilinear identities and functional inequality battery")
    common(sp)
    sp.add_argument("--trials", type=int, default=None, help="random trials (>= 1)")
    sp.set_defaults(func=cmd_identities)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        for k, v in exc.errors.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AssertionFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
