"""Command-line driver: ``nlsinflate <command> [options]``.

Commands
--------
run         expand one case at one or more ``N`` and write reports
sweep       run a case across ``N`` in parallel and fit the ratio exponent
resonance   enumerate resonant tuples; check the quintic parametrization
norms       evaluate a list of norms on a datum and its series at ``T``
compare     compare the truncated series with the reference time stepper
sequence    exact recursive sequence and the geometric bound check

Options may also come from a JSON file (``--config``) carrying
``"schema": "nlsinflate.config/1"``; flags given on the command line win.
Exit codes: 0 ok, 1 configuration error, 2 numeric guard (divergence,
term cap, enumeration guard, solver blow-up).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .exppoly import TermCapError
from .norms import NormSpec, evaluate_norm
from .picard import (DivergenceError, IterateTable, NonlinearitySpec, SequenceHypothesisError,
                     sequence_a, series_sum, verify_sequence_bound)
from .resonance import (EnumerationGuardError, enumerate_resonant_array, parametrized_array,
                        verify_characterization)
from .scenarios import CASE_IDS, Scenario, build_phi, run_inflation, schedule_case
from .solver import SolverBlowupError, SolverConfig, compare_series

CONFIG_SCHEMA = "nlsinflate.config/1"
NORMS_COLUMNS = ["case_id", "N", "s", "r", "A", "T", "rho", "rho_hat", "norm_phi", "norm_U1",
                 "norm_Umain", "norm_Ulow", "norm_Uhigh", "norm_u", "ratio", "valid"]
SWEEP_COLUMNS = ["case_id", "N", "norm_kind", "norm_phi", "norm_u", "ratio", "rho", "rho_hat",
                 "valid", "exponent", "r2"]
EMIT_CHOICES = ("csv", "svg", "jsonl")
NUMERIC_ERRORS = (DivergenceError, TermCapError, EnumerationGuardError, SolverBlowupError,
                  MemoryError)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _workers():
    raw = os.environ.get("INFLATE_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"INFLATE_WORKERS must be an integer, got {raw!r}")
    return max(1, n)


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(data, dict) or data.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(f"config must be a JSON object with schema {CONFIG_SCHEMA!r}")
    return data


def merge_config(args):
    """Fold ``--config`` values into ``args`` wherever no flag was given."""
    if not getattr(args, "config", None):
        return args
    data = load_config(args.config)
    for key, val in data.items():
        if key in ("schema", "command"):
            continue
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, val)
    return args


def _is_dyadic(n):
    return n >= 1 and (n & (n - 1)) == 0


def _check_N(values):
    if values is None or len(values) == 0:
        raise ConfigError("at least one N is required")
    out = []
    for v in values:
        n = int(v)
        if n != v or not _is_dyadic(n) or n < 4:
            raise ConfigError(f"N must be a power of two >= 4, got {v}")
        out.append(n)
    return out


def _overrides(args):
    ov = {}
    for key in ("s", "r", "A", "T", "rho", "gauge_j"):
        val = getattr(args, key, None)
        if val is not None:
            ov[key] = val
    if getattr(args, "overrides", None):
        ov.update(args.overrides)
    if getattr(args, "nonlinearity", None):
        ov["nonlinearity"] = _parse_nonlinearity(args.nonlinearity)
    return ov


def _parse_nonlinearity(value):
    if isinstance(value, list):
        return NonlinearitySpec.from_list(value)
    terms = []
    for part in str(value).split(","):
        bits = part.split(":")
        if len(bits) not in (2, 3):
            raise ConfigError(f"nonlinearity term must be p:q[:nu], got {part!r}")
        p, q = int(bits[0]), int(bits[1])
        nu = complex(bits[2]) if len(bits) == 3 else 1.0
        terms.append((p, q, nu))
    return NonlinearitySpec(tuple(terms))


def parse_norm(text):
    """``Kind:v1,v2`` (e.g. ``Hs:-0.5``, ``DBracket:0.1,2,inf``) to a :class:`NormSpec`."""
    kind, _, rest = text.partition(":")
    params = tuple(float(v) for v in rest.split(",")) if rest else ()
    try:
        return NormSpec(kind, params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad norm {text!r}: {exc}")


def _out_dir(args):
    out = Path(args.output_dir or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}")
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _emit(args):
    emit = args.emit
    if emit is None:
        return {"csv", "jsonl"}
    if isinstance(emit, str):
        emit = emit.split(",")
    emit = set(emit)
    bad = emit - set(EMIT_CHOICES)
    if bad:
        raise ConfigError(f"unknown emit kinds {sorted(bad)}")
    return emit


def _scenarios(args):
    if getattr(args, "scenario", None):
        path = args.scenario
        try:
            with open(path) as fh:
                return [Scenario.from_dict(json.loads(line)) for line in fh if line.strip()]
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read scenario file {path}: {exc}")
    if not args.case:
        raise ConfigError("give --case or --scenario")
    if args.case not in CASE_IDS:
        raise ConfigError(f"unknown case {args.case!r}; choose from {', '.join(CASE_IDS)}")
    Ns = _check_N(args.N)
    ov = _overrides(args)
    if getattr(args, "norm", None):
        ov["norm"] = parse_norm(args.norm) if isinstance(args.norm, str) else NormSpec.from_dict(args.norm)
    try:
        return [schedule_case(args.case, n, ov) for n in Ns]
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def svg_loglog(xs, ys, title="ratio vs N", xlabel="N", ylabel="ratio", width=480, height=320):
    """Static log-log line chart as an SVG string."""
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(y)]
    pad = 48
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n'
            f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>\n')
    axes = (f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad / 2}" y2="{height - pad}" stroke="black"/>\n'
            f'<line x1="{pad}" y1="{height - pad}" x2="{pad}" y2="{pad / 2}" stroke="black"/>\n'
            f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel} (log)</text>\n'
            f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
            f'text-anchor="middle">{ylabel} (log)</text>\n')
    if not pts:
        return head + axes + "</svg>\n"
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = lx.min(), lx.max()
    y0, y1 = ly.min(), ly.max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda v: pad + (v - x0) / (x1 - x0) * (width - 1.5 * pad)
    sy = lambda v: height - pad - (v - y0) / (y1 - y0) * (height - 1.5 * pad)
    coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx, ly))
    body = f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{coords}"/>\n'
    for (x, y), a, b in zip(pts, lx, ly):
        body += (f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>\n'
                 f'<text x="{sx(a):.2f}" y="{height - pad + 14}" text-anchor="middle" '
                 f'font-size="10">{x:g}</text>\n')
    body += (f'<text x="{pad - 4}" y="{sy(y0):.2f}" text-anchor="end" font-size="10">{10 ** y0:.3g}</text>\n'
             f'<text x="{pad - 4}" y="{sy(y1):.2f}" text-anchor="end" font-size="10">{10 ** y1:.3g}</text>\n')
    return head + axes + body + "</svg>\n"


def fit_exponent(Ns, ratios):
    """Least-squares slope and R^2 of ``log ratio`` against ``log N``."""
    pts = [(n, r) for n, r in zip(Ns, ratios) if r is not None and r > 0 and math.isfinite(r)]
    if len(pts) < 2:
        return None, None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / tot if tot > 0 else 1.0
    return float(slope), float(r2)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(args):
    scenarios = _scenarios(args)
    out = _out_dir(args)
    emit = _emit(args)
    strict = not args.no_strict
    reports, status = [], EXIT_OK
    for sc in scenarios:
        try:
            rep = run_inflation(sc, args.K, workers=_workers(), strict=strict)
        except DivergenceError as exc:
            rep = getattr(exc, "report", None)
            print(f"{sc.case_id} N={sc.N}: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
        except (TermCapError, MemoryError) as exc:
            print(f"{sc.case_id} N={sc.N}: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        if rep is not None:
            reports.append(rep)
            print(f"{sc.case_id} N={sc.N} ratio={rep.ratio:.6g} rho_hat={rep.rho_hat:.3g} "
                  f"valid={str(rep.valid).lower()} dominance={str(rep.dominance_holds).lower()}")
    if "jsonl" in emit:
        with open(out / "report.jsonl", "w") as fh:
            for rep in reports:
                fh.write(json.dumps(rep.to_dict(), default=_json_default) + "\n")
    if "csv" in emit:
        write_csv(out / "norms.csv", NORMS_COLUMNS, [rep.csv_row() for rep in reports])
    if "svg" in emit:
        (out / "ratio.svg").write_text(svg_loglog([r.scenario.N for r in reports],
                                                  [r.ratio for r in reports]))
    return status


def _sweep_one(payload):
    sc_dict, K = payload
    sc = Scenario.from_dict(sc_dict)
    warnings.simplefilter("ignore")
    try:
        rep = run_inflation(sc, K, strict=False)
    except NUMERIC_ERRORS + (ValueError,) as exc:
        return {"case_id": sc.case_id, "N": sc.N, "norm_kind": sc.norm.label(), "valid": "failed",
                "error": f"{type(exc).__name__}: {exc}"}
    return {"case_id": sc.case_id, "N": sc.N, "norm_kind": rep.norm_label,
            "norm_phi": rep.norm_phi, "norm_u": rep.norm_u, "ratio": rep.ratio, "rho": rep.rho,
            "rho_hat": rep.rho_hat, "valid": rep.valid}


def cmd_sweep(args):
    scenarios = _scenarios(args)
    out = _out_dir(args)
    emit = _emit(args)
    payloads = [(sc.to_dict(), args.K) for sc in scenarios]
    nw = min(_workers(), len(payloads))
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    ok = [r for r in rows if r.get("valid") != "failed"]
    slope, r2 = fit_exponent([r["N"] for r in ok], [r["ratio"] for r in ok])
    for row in rows:
        row["exponent"] = "" if slope is None else slope
        row["r2"] = "" if r2 is None else r2
        if "error" in row:
            print(f"{row['case_id']} N={row['N']}: {row['error']}", file=sys.stderr)
        else:
            print(f"{row['case_id']} N={row['N']} {row['norm_kind']} ratio={row['ratio']:.6g}")
    if slope is not None:
        print(f"exponent={slope:.6g} r2={r2:.6g}")
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    if "svg" in emit:
        (out / "sweep.svg").write_text(svg_loglog([r["N"] for r in ok], [r["ratio"] for r in ok]))
    return EXIT_OK


def cmd_resonance(args):
    d, nu, K = int(args.d), int(args.nu), int(args.range)
    if d < 1 or nu < 1 or K < 0:
        raise ConfigError("need d >= 1, nu >= 1, range >= 0")
    k = tuple(int(v) for v in (args.k or [0] * d))
    if len(k) != d:
        raise ConfigError(f"output frequency needs {d} components")
    out = _out_dir(args)
    n = 2 * nu + 1
    try:
        brute = enumerate_resonant_array(d, nu, k, K)
    except EnumerationGuardError as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    quintic = d == 1 and nu == 2 and k == (0,)
    rows = []
    if quintic:
        if K > 16:
            print("guard: the parametrization check runs for range <= 16", file=sys.stderr)
            return EXIT_NUMERIC
        rep = verify_characterization(K)
        param = {tuple(int(v) for v in row) for row in parametrized_array(K)}
        flat = [tuple(int(v) for v in row[:, 0]) for row in brute]
        seen = set(flat)
        for t in flat:
            rows.append(t + (k[0], 0, "both" if t in param else "brute"))
        for t in sorted(param - seen):
            rows.append(t + (k[0], 0, "param"))
        summary = rep.summary()
    else:
        for row in brute:
            slots = tuple(";".join(str(int(v)) for v in f) if d > 1 else int(f[0]) for f in row)
            kk = ";".join(map(str, k)) if d > 1 else k[0]
            rows.append(slots + (kk, 0, "brute"))
        summary = f"K={K} brute_count={len(rows)} parametrization=none"
    cols = [f"k{m + 1}" for m in range(n)] + ["k", "phase", "source"]
    with open(out / "resonance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(rows)
    (out / "resonance_summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_norms(args):
    scenarios = _scenarios(args)
    out = _out_dir(args)
    specs = [parse_norm(t) for t in (args.norms or [])] or None
    rows = []
    for sc in scenarios:
        phi = build_phi(sc)
        K = 3 * (sc.p_max - 1) + 1 if args.K is None else int(args.K)
        try:
            table = IterateTable.build(phi, sc.nonlinearity, sc.T, K, _workers())
            u, rho_hat = series_sum(table, sc.T, K, strict=False)
        except (TermCapError, MemoryError) as exc:
            print(f"{sc.case_id} N={sc.N}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        for spec in specs or [sc.norm]:
            try:
                a, b = evaluate_norm(phi, spec), evaluate_norm(u, spec)
            except ValueError as exc:
                raise ConfigError(f"{spec.label()}: {exc}")
            rows.append({"case_id": sc.case_id, "N": sc.N, "norm": spec.label(), "norm_phi": a,
                         "norm_u": b, "ratio": b / a if a else float("inf"), "rho_hat": rho_hat})
            print(f"{sc.case_id} N={sc.N} {spec.label()} phi={a:.6g} u={b:.6g}")
    write_csv(out / "norms_table.csv", ["case_id", "N", "norm", "norm_phi", "norm_u", "ratio", "rho_hat"],
              rows)
    return EXIT_OK


def cmd_compare(args):
    scenarios = _scenarios(args)
    out = _out_dir(args)
    K = 7 if args.K is None else int(args.K)
    results = []
    for sc in scenarios:
        if not sc.domain.is_exact:
            raise ConfigError("compare needs a pure torus scenario")
        cfg = SolverConfig.for_horizon(sc.T, int(args.steps), int(args.cutoff), _workers())
        try:
            res = compare_series(sc, K, cfg)
        except (TermCapError, SolverBlowupError, MemoryError) as exc:
            print(f"{sc.case_id} N={sc.N}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        except ValueError as exc:
            raise ConfigError(str(exc))
        res.update(case_id=sc.case_id, N=sc.N, K=K)
        results.append(res)
        print(f"{sc.case_id} N={sc.N} l2_rel_err={res['l2_rel_err']:.3g} bound={res['bound']:.3g} "
              f"order={res['dt_order_estimate']:.3g} rho_hat={res['rho_hat']:.3g}")
    with open(out / "compare.json", "w") as fh:
        json.dump(results, fh, indent=2, default=_json_default)
    return EXIT_OK


def cmd_sequence(args):
    p, kmax = int(args.p), int(args.kmax)
    try:
        a = sequence_a(p, kmax)
    except ValueError as exc:
        raise ConfigError(str(exc))
    out = _out_dir(args)
    C = float(args.C)
    try:
        ok = verify_sequence_bound(a, p, C)
        msg = f"p={p} kmax={kmax} C={C:g} bound_holds={str(ok).lower()}"
    except SequenceHypothesisError as exc:
        ok = False
        msg = f"p={p} kmax={kmax} C={C:g} hypothesis_fails_at_k={exc.k}"
    with open(out / "sequence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "a_k", "a_k_float"])
        for k, v in enumerate(a, start=1):
            w.writerow([k, str(v), float(v)])
    print(msg)
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(sp, case=True):
    sp.add_argument("--config", help="JSON config with schema " + CONFIG_SCHEMA)
    sp.add_argument("--output-dir", "--out", dest="output_dir", default=None)
    if case:
        sp.add_argument("--case", default=None, help="case id")
        sp.add_argument("--scenario", default=None, help="jsonl file of serialized scenarios")
        sp.add_argument("--N", type=int, nargs="*", default=None, help="dyadic frequency scales")
        sp.add_argument("--K", type=int, default=None, help="iterate depth")
        sp.add_argument("--s", type=float, default=None)
        sp.add_argument("--r", type=float, default=None)
        sp.add_argument("--A", type=float, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--rho", type=float, default=None, help="solve T for this rho")
        sp.add_argument("--gauge-j", dest="gauge_j", type=int, default=None)
        sp.add_argument("--nonlinearity", default=None, help="terms p:q[:nu], comma separated")
        sp.add_argument("--norm", default=None, help="target norm, e.g. Hs:-0.5")
        sp.add_argument("--emit", default=None, help="comma list from csv,svg,jsonl")
        sp.set_defaults(overrides=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="nlsinflate", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="expand one case and write reports")
    _common(sp)
    sp.add_argument("--no-strict", action="store_true", help="do not signal divergence")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a case across N and fit the exponent")
    _common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("resonance", help="enumerate resonant tuples")
    _common(sp, case=False)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--nu", type=int, default=None)
    sp.add_argument("--range", type=int, default=None)
    sp.add_argument("--k", type=int, nargs="*", default=None, help="output frequency")
    sp.set_defaults(func=cmd_resonance)

    sp = sub.add_parser("norms", help="evaluate norms of a datum and its series")
    _common(sp)
    sp.add_argument("--eval", dest="norms", action="append", default=None,
                    help="extra norm, repeatable (e.g. ModA:4)")
    sp.set_defaults(func=cmd_norms)

    sp = sub.add_parser("compare", help="series against the reference stepper")
    _common(sp)
    sp.add_argument("--cutoff", type=int, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sequence", help="exact recursive sequence")
    _common(sp, case=False)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--kmax", type=int, default=None)
    sp.add_argument("--C", type=float, default=None)
    sp.set_defaults(func=cmd_sequence)
    return ap


_DEFAULTS = {
    "resonance": {"d": 1, "nu": 2, "range": 6},
    "compare": {"cutoff": 1024, "steps": 64},
    "sequence": {"p": 2, "kmax": 30, "C": 1.0},
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        merge_config(args)
        for key, val in _DEFAULTS.get(args.command, {}).items():
            if getattr(args, key) is None:
                setattr(args, key, val)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
