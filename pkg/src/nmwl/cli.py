"""Command-line front end: ``nmwl analyze | reduce | schools | simulate``.

Exit codes: 0 success, 2 input or configuration error, 3 numerical failure,
4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from collections import OrderedDict
from dataclasses import fields
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import mcverify
from .complexity import ComplexityCache, Mode
from .errors import ConfigError, DegenerateVariance, NMWLError
from .evidence import analyze, hypothesis_spaces, mle_baseline
from .families import FamilyInstance, Kind, ReducedObservation, reduce_two_sample
from .quadrature import QuadratureConfig
from .weights import custom_weights
from .wlik import ComparisonSet, OptimConfig, ParameterSpace

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
CSV_COLUMNS = ["id", "di_bits_exact", "di_bits_approx", "grade", "favors", "regret_bits", "scheme"]
PAIRED_COLUMNS = ["id", "di_bits_sites", "di_bits_null", "grade_sites", "grade_null", "grades_agree"]
MODE_NAMES = {"exact": [Mode.EXACT], "approx": [Mode.APPROXIMATE],
              "both": [Mode.EXACT, Mode.APPROXIMATE]}


class InputError(Exception):
    """Bad input file or configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# input

def _read_csv(path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise InputError(f"{path}: empty file (a header row is required)")
            header = [h.strip() for h in reader.fieldnames]
            rows = [{k.strip(): (v or "").strip() for k, v in r.items() if k is not None}
                    for r in reader]
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 ({exc.reason})") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    return [dict(r, _header=header) for r in rows]


def _number(row, key, kind, line):
    text = row.get(key, "")
    try:
        return kind(text)
    except ValueError:
        raise InputError(f"row {line} (id {row.get('id', '?')!r}): {key}={text!r} is not a valid "
                         f"{'integer' if kind is int else 'number'}") from None


def load_statistics(path, family: str = "auto") -> ComparisonSet:
    """Parse ``id,t,sigma[,n_i]`` (normal) or ``id,t,m,n[,n_i]`` (folded-t)."""
    rows = _read_csv(path)
    header = set(rows[0]["_header"])
    if not {"id", "t"} <= header:
        raise InputError(f"{path}: header must contain 'id' and 't'")
    detected = "normal" if "sigma" in header else ("folded-t" if {"m", "n"} <= header else None)
    if detected is None:
        raise InputError(f"{path}: need a 'sigma' column (normal) or 'm' and 'n' columns (folded-t)")
    if family not in ("auto", detected):
        raise InputError(f"{path}: --family {family} does not match the columns ({detected})")
    obs, seen = [], set()
    for line, row in enumerate(rows, start=2):
        rid = row["id"]
        if not rid:
            raise InputError(f"row {line}: empty id")
        if rid in seen:
            raise InputError(f"row {line}: duplicate id {rid!r}")
        seen.add(rid)
        t = _number(row, "t", float, line)
        n_i = _number(row, "n_i", int, line) if row.get("n_i") else None
        try:
            if detected == "normal":
                fam = FamilyInstance.normal(_number(row, "sigma", float, line))
            else:
                fam = FamilyInstance.folded_t(_number(row, "m", int, line),
                                              _number(row, "n", int, line))
            obs.append(ReducedObservation(t, fam, n_i, rid))
        except NMWLError as exc:
            raise InputError(f"row {line} (id {rid!r}): {exc}") from None
    return ComparisonSet(tuple(obs))


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _dataclass_from(cls, section: dict | None, name: str):
    section = section or {}
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise InputError(f"[{name}]: unknown keys {sorted(unknown)}; allowed {sorted(allowed)}")
    try:
        return cls(**section)
    except (NMWLError, TypeError) as exc:
        raise InputError(f"[{name}]: {exc}") from None


def numeric_settings(cfg: dict):
    return (_dataclass_from(QuadratureConfig, cfg.get("quadrature"), "quadrature"),
            _dataclass_from(OptimConfig, cfg.get("optimizer"), "optimizer"))


def custom_rows(cfg: dict, obs: ComparisonSet):
    """Rows from ``[weights] rows = [[...], ...]`` with optional ``pseudo = [[w0, t0], ...]``."""
    section = cfg.get("weights") or {}
    rows = section.get("rows")
    if not rows or len(rows) != len(obs):
        raise InputError(f"[weights]: 'rows' must hold one row per comparison ({len(obs)})")
    pseudo = section.get("pseudo") or [None] * len(rows)
    if len(pseudo) != len(rows):
        raise InputError("[weights]: 'pseudo' must match 'rows' in length")
    out = []
    for i, (w, p) in enumerate(zip(rows, pseudo)):
        try:
            w0, t0 = (None, None) if p is None or len(p) == 0 else (float(p[0]), float(p[1]))
            out.append(custom_weights(i, [float(x) for x in w], w0, t0))
        except (NMWLError, TypeError, ValueError, IndexError) as exc:
            raise InputError(f"[weights] row {i + 1}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# analysis and output

def run_analysis(obs, schemes, modes, null_point, alternative, rows, q, optim, workers):
    cache = ComplexityCache()
    results = OrderedDict()
    for scheme in schemes:
        try:
            results[scheme] = analyze(obs, scheme, modes, null_point, alternative,
                                      rows if scheme == "custom" else None, q, optim, workers, cache)
        except NMWLError as exc:
            cid = getattr(exc, "comparison_id", None)
            if cid is None:
                raise
            raise NumericalError(f"comparison {cid!r} ({scheme} scheme): {exc}") from exc
    return results


class NumericalError(Exception):
    """Numerical failure tied to a comparison; maps to exit code 3."""


def _primary(by_mode):
    return by_mode.get(Mode.EXACT) or by_mode.get(Mode.APPROXIMATE)


def flat_rows(results) -> list[dict]:
    out = []
    for scheme, by_mode in results.items():
        exact = by_mode.get(Mode.EXACT)
        approx = by_mode.get(Mode.APPROXIMATE)
        primary = _primary(by_mode)
        for k, rep in enumerate(primary):
            out.append({
                "id": rep.id,
                "di_bits_exact": exact[k].di_bits if exact else "",
                "di_bits_approx": approx[k].di_bits if approx else "",
                "grade": rep.grade.value,
                "favors": rep.favors.value,
                "regret_bits": rep.regret_bits,
                "scheme": scheme,
            })
    return out


def paired_rows(results) -> list[dict]:
    if not ("sites" in results and "null" in results):
        return []
    a, b = _primary(results["sites"]), _primary(results["null"])
    return [{"id": x.id, "di_bits_sites": x.di_bits, "di_bits_null": y.di_bits,
             "grade_sites": x.grade.value, "grade_null": y.grade.value,
             "grades_agree": x.grade == y.grade and x.favors == y.favors}
            for x, y in zip(a, b)]


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def build_json(obs, results, null_point, alternative, baseline) -> dict:
    doc = {"family": obs.kind.value, "null_point": null_point, "alternative": alternative,
           "comparisons": len(obs), "schemes": {}}
    for scheme, by_mode in results.items():
        doc["schemes"][scheme] = {m.value: [r.to_dict() for r in reps] for m, reps in by_mode.items()}
    paired = paired_rows(results)
    if paired:
        doc["paired"] = paired
    if baseline is not None:
        doc["mle_baseline"] = baseline
    return doc


def baseline_summary(obs, alternative):
    """MLE-baseline comparison for nonnegative alternatives, or ``None``."""
    theta1, _ = hypothesis_spaces(obs, 0.0, alternative)
    if theta1.kind.value != "half-line" or len(obs) < 2:
        return None
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = mle_baseline(obs, theta1)
    return {"theta_alt": fit.theta_alt, "p": fit.p, "degenerate": fit.degenerate,
            "log2_ratios": OrderedDict((o.id, float(v)) for o, v in zip(obs.observations,
                                                                         fit.log2_ratios))}


def write_outputs(obs, results, args, baseline):
    doc = build_json(obs, results, args.null, args.alt, baseline)
    flat = flat_rows(results)
    paired = paired_rows(results)
    if args.out is None:
        if args.format == "json":
            sys.stdout.write(json.dumps(doc, indent=2) + "\n")
        else:
            sys.stdout.write(_csv_text(flat, CSV_COLUMNS))
        return
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        out.write_text(_csv_text(flat, CSV_COLUMNS), encoding="utf-8")
    stem = out.with_suffix("")
    if paired:
        Path(f"{stem}_paired.csv").write_text(_csv_text(paired, PAIRED_COLUMNS), encoding="utf-8")
    plot = [{"id": r["id"], "scheme": r["scheme"], "mode": mode, "di_bits": r[col]}
            for r in flat for mode, col in (("exact", "di_bits_exact"), ("approximate", "di_bits_approx"))
            if r[col] != ""]
    Path(f"{stem}_plot_information.csv").write_text(
        _csv_text(plot, ["id", "scheme", "mode", "di_bits"]), encoding="utf-8")
    if baseline is not None and "sites" in results:
        sites = _primary(results["sites"])
        mle_rows = [{"id": r.id, "di_bits": r.di_bits, "mle_log2_ratio": baseline["log2_ratios"][r.id]}
                    for r in sites]
        Path(f"{stem}_plot_mle.csv").write_text(
            _csv_text(mle_rows, ["id", "di_bits", "mle_log2_ratio"]), encoding="utf-8")


def _schemes(weights: str) -> list[str]:
    return {"both": ["sites", "null"]}.get(weights, [weights])


def cmd_analyze(args, obs=None) -> int:
    cfg = load_config(args.config)
    q, optim = numeric_settings(cfg)
    if obs is None:
        obs = load_statistics(args.input, args.family)
    schemes = _schemes(args.weights)
    if "sites" in schemes and len(obs) < 2:
        raise InputError("the sites scheme needs at least two comparisons; use --weights null")
    rows = custom_rows(cfg, obs) if "custom" in schemes else None
    try:
        hypothesis_spaces(obs, args.null, args.alt)
        ParameterSpace.singleton(args.null).closure_bounds(obs.family(0))
    except NMWLError as exc:
        raise InputError(str(exc)) from None
    results = run_analysis(obs, schemes, MODE_NAMES[args.mode], args.null, args.alt, rows, q,
                           optim, args.workers)
    baseline = baseline_summary(obs, args.alt)
    write_outputs(obs, results, args, baseline)
    return EXIT_OK


def cmd_reduce(args) -> int:
    rows = _read_csv(args.raw)
    header = set(rows[0]["_header"])
    if not {"feature_id", "group", "value"} <= header:
        raise InputError(f"{args.raw}: header must contain feature_id, group, value")
    groups: dict[str, dict[str, list[float]]] = {}
    for line, row in enumerate(rows, start=2):
        g = row["group"]
        if g not in ("case", "control"):
            raise InputError(f"row {line}: group must be 'case' or 'control', got {g!r}")
        v = _number(row, "value", float, line)
        groups.setdefault(row["feature_id"], {"case": [], "control": []})[g].append(v)
    short = [f for f, d in groups.items() if len(d["case"]) < 2 or len(d["control"]) < 2]
    if short:
        raise InputError("features need >= 2 values in each group: " + ", ".join(sorted(short)))
    out, degenerate = [], []
    for fid in sorted(groups):
        d = groups[fid]
        try:
            o = reduce_two_sample(d["case"], d["control"], fid)
        except DegenerateVariance:
            degenerate.append(fid)
            continue
        m, n = o.family.group_sizes
        out.append({"id": fid, "t": o.statistic, "m": m, "n": n})
    if degenerate:
        raise InputError("features with zero pooled variance: " + ", ".join(degenerate))
    text = _csv_text(out, ["id", "t", "m", "n"])
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def bundled(name: str):
    return resources.files("nmwl").joinpath("data", name)


def cmd_schools(args) -> int:
    with resources.as_file(bundled("schools.csv")) as path:
        obs = load_statistics(path, "normal")
    args.weights, args.mode, args.null, args.alt = "both", "both", 0.0, "two-sided"
    return cmd_analyze(args, obs)


# ---------------------------------------------------------------------------
# simulate

def _family_from(check: dict) -> FamilyInstance:
    fam = check.get("family")
    if fam == "normal":
        return FamilyInstance.normal(float(check.get("sigma", 1.0)))
    if fam == "folded-t":
        return FamilyInstance.folded_t(int(check["m"]), int(check["n"]))
    raise ConfigError(f"unknown family {fam!r}")


CHECK_KEYS = {
    "misleading_evidence": {"theta0", "N", "scheme", "replicates", "thresholds", "mode",
                            "alternative"},
    "complexity_convergence": {"Ns", "replicates", "tolerance"},
    "interpretability_trend": {"theta0", "N", "scheme", "replicates", "n_grid", "k", "mode"},
}
FAMILY_KEYS = {"kind", "family", "sigma", "m", "n", "sample_size"}


def run_check(check: dict, seed: int, workers: int, q, optim) -> mcverify.VerificationReport:
    kind = check.get("kind")
    if kind not in CHECK_KEYS:
        raise ConfigError(f"unknown check kind {kind!r}")
    unknown = set(check) - CHECK_KEYS[kind] - FAMILY_KEYS
    if unknown:
        raise ConfigError(f"check {kind}: unknown keys {sorted(unknown)}")
    fam = _family_from(check)
    theta0 = float(check.get("theta0", 0.0))
    replicates = int(check.get("replicates", 1000))
    if kind == "complexity_convergence":
        Ns = [int(x) for x in check.get("Ns", [5, 50])]
        cfg = mcverify.SimulationConfig(fam, 0.0, max(Ns), replicates, seed,
                                        sample_size=check.get("sample_size"))
        return mcverify.complexity_convergence(cfg, Ns, float(check.get("tolerance", 0.05)), q, optim)
    N = int(check.get("N", 1))
    scheme = check.get("scheme", "sites" if N > 1 else "null")
    mode = {"approx": "approximate"}.get(check.get("mode", "exact"), check.get("mode", "exact"))
    if kind == "interpretability_trend":
        k = float(check.get("k", 8.0))
        if not k >= 1.0:
            raise ConfigError(f"threshold k must be >= 1, got {k}")
        cfg = mcverify.SimulationConfig(fam, theta0, N, replicates, seed, scheme, (k,), mode,
                                        check.get("sample_size"))
        return mcverify.interpretability_trend(cfg, check.get("n_grid", [4, 16, 64]), k, workers,
                                               q, optim)
    cfg = mcverify.SimulationConfig(fam, theta0, N, replicates, seed, scheme,
                                    tuple(check.get("thresholds", [10, 100])), mode,
                                    check.get("sample_size"))
    alternative = check.get("alternative", "two-sided")
    obs = ComparisonSet.from_arrays([max(theta0, 0.0)], fam)
    theta1, _ = hypothesis_spaces(obs, theta0, alternative)
    return mcverify.misleading_evidence_rate(cfg, theta0, theta1, workers, q, optim)


def cmd_simulate(args) -> int:
    if args.config_path is None:
        with resources.as_file(bundled("simulate_default.toml")) as path:
            cfg = load_config(path)
    else:
        cfg = load_config(args.config_path)
    q, optim = numeric_settings(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    checks = cfg.get("check") or []
    if not checks:
        raise InputError("simulation config has no [[check]] entries")
    try:
        seed = int(seed)
        reports = [run_check(dict(c), seed, args.workers, q, optim) for c in checks]
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        raise InputError(f"simulation config: {exc}") from None
    doc = {"seed": seed, "passed": all(r.passed for r in reports),
           "reports": [r.to_dict() for r in reports]}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmwl", description="Evidence in bits from normalized "
                                "maximum weighted likelihood.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, analysis=True):
        sp.add_argument("--out", help="output file (stdout when omitted)")
        sp.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
        sp.add_argument("--config", help="TOML file with [quadrature], [optimizer] and [weights]")
        if analysis:
            sp.add_argument("--format", choices=["json", "csv"], default="csv")

    a = sub.add_parser("analyze", help="information per comparison from a statistics CSV")
    a.add_argument("input")
    a.add_argument("--family", choices=["auto", "normal", "folded-t"], default="auto")
    a.add_argument("--weights", choices=["sites", "null", "blended", "both", "custom"],
                   default="both")
    a.add_argument("--mode", choices=["exact", "approx", "both"], default="both")
    a.add_argument("--null", type=float, default=0.0, help="null parameter value")
    a.add_argument("--alt", choices=["two-sided", "nonneg"], default="two-sided")
    common(a)

    r = sub.add_parser("reduce", help="two-sample |t| statistics from a long-format raw CSV")
    r.add_argument("raw")
    r.add_argument("--out")

    s = sub.add_parser("schools", help="bundled eight-schools analysis")
    common(s)

    m = sub.add_parser("simulate", help="Monte Carlo verification report")
    m.add_argument("config_path", nargs="?", help="TOML config (bundled default when omitted)")
    m.add_argument("--seed", type=int)
    m.add_argument("--out")
    m.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"analyze": cmd_analyze, "reduce": cmd_reduce, "schools": cmd_schools,
               "simulate": cmd_simulate}[args.command]
    try:
        return handler(args)
    except InputError as exc:
        print(f"nmwl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"nmwl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NMWLError as exc:
        print(f"nmwl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
