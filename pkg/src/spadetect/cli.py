"""Command-line front end.

Examples::

    spadetect gen --family bell --which 0 --out bell.json
    spadetect spa-info --map transpose --d 3
    spadetect detect --state bell.json --mode sampled --shots 1000000 --seed 1
    spadetect sweep --family werner --start 0 --stop 1 --points 101 --out werner.csv
    spadetect spectrum --state bell.json --apply-spa transpose

Exit codes: 0 ran (the verdict is in the payload), 2 usage or input error,
3 dense capacity exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import version_string
from .detector import detect, exact_spectrum, resolve_spa
from .errors import DEFAULT_DENSE_CAP, CapacityError
from .interfero import BACKENDS, power_trace, rng_stream
from .posmap import BUILTIN_MAPS, apply_spa, load_map, postselect_normalize, spa_output
from .qstate import (load_state, make_bell, make_isotropic, make_max_entangled, make_werner,
                     maximally_mixed, random_density, random_separable, state_to_json)
from .spectrum import newton_spectrum, project_simplex

FAMILIES = ("bell", "werner", "isotropic", "maxent", "mixed", "random", "separable")
SWEEP_FAMILIES = ("werner", "isotropic")
SWEEP_COLUMNS = ("param", "verdict", "lambda_min", "std_error", "threshold", "rescale",
                 "lambda_prime", "eof_lower", "eof_upper")


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def make_state(family, *, which=0, q=None, f=None, d=2, rank=None, terms=10, seed=None):
    """Build a state from a named family."""
    if family == "bell":
        return make_bell(which).to_density()
    if family == "werner":
        if q is None:
            raise ValueError("werner family needs --q")
        return make_werner(q)
    if family == "isotropic":
        if f is None:
            raise ValueError("isotropic family needs --f")
        return make_isotropic(f, d)
    if family == "maxent":
        return make_max_entangled(d).to_density()
    if family == "mixed":
        return maximally_mixed((d, d))
    if family == "random":
        return random_density(d * d, rank, seed=seed, dims=(d, d))
    if family == "separable":
        return random_separable(d, terms, seed=seed)
    raise ValueError(f"unknown family {family!r}")


def _state_from_args(args, seed_attr="state_seed"):
    if getattr(args, "state", None):
        return load_state(args.state)
    if not getattr(args, "family", None):
        raise ValueError("give --state FILE or --family NAME")
    return make_state(args.family, which=args.which, q=args.q, f=args.f, d=args.d,
                      rank=args.rank, terms=args.terms, seed=getattr(args, seed_attr))


def _test_from_args(args):
    if getattr(args, "map_file", None):
        return load_map(args.map_file)
    return args.map


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


# --- commands -------------------------------------------------------------

def cmd_gen(args):
    rho = make_state(args.family, which=args.which, q=args.q, f=args.f, d=args.d,
                     rank=args.rank, terms=args.terms, seed=args.seed)
    body = state_to_json(rho).rstrip().rstrip("}").rstrip()
    meta = json.dumps(_config(args), sort_keys=True)
    text = f'{body},\n  "config": {meta},\n  "version": {json.dumps(version_string())}\n}}\n'
    _emit(text, args.out)
    return 0


def spa_summary(test, d) -> dict:
    spa = resolve_spa(test, d)
    return {
        "map": spa.name,
        "d": spa.d,
        "lambda": spa.lambda_neg,
        "p_star": spa.p_star,
        "threshold": spa.threshold,
        "identity_coefficient": spa.identity_coefficient,
        "map_coefficient": spa.map_coefficient,
        "trace_preserving": spa.trace_preserving,
        "choi_min_eigenvalue": float(np.linalg.eigvalsh(spa.choi_full)[0]),
    }


def cmd_spa_info(args):
    summary = spa_summary(_test_from_args(args), args.d)
    if args.format == "text":
        lines = [f"{k}: {v}" for k, v in summary.items()]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_dump_json({**summary, "config": _config(args), "version": version_string()}),
              args.out)
    return 0


def _detect_kwargs(args):
    return dict(mode=args.mode, shots=args.shots, decision_sigma=args.decision_sigma,
                seed=args.seed, backend=args.backend, cap=args.cap)


def cmd_detect(args):
    rho = _state_from_args(args)
    report = detect(rho, _test_from_args(args), **_detect_kwargs(args))
    payload = {
        "config": _config(args),
        "version": version_string(),
        "report": report.to_dict(),
        "eof_bounds": report.eof.to_dict() if report.eof else None,
    }
    _emit(_dump_json(payload), args.out)
    return 0


def _sweep_point(job):
    i, param, family, d, test, kwargs = job
    rho = make_werner(param) if family == "werner" else make_isotropic(param, d)
    rep = detect(rho, test, stream=(i,), **kwargs)
    eof = rep.eof
    return {
        "param": param,
        "verdict": rep.verdict.value,
        "lambda_min": rep.lambda_min_estimate,
        "std_error": rep.lambda_min_std_error,
        "threshold": rep.threshold,
        "rescale": rep.rescale_factor,
        "lambda_prime": eof.lambda_prime if eof else None,
        "eof_lower": eof.lower if eof else None,
        "eof_upper": eof.upper if eof else None,
    }


def run_sweep(family, params, d=2, test="transpose", workers=1, **detect_kwargs) -> list[dict]:
    """Detect over a one-parameter family; rows come back in parameter order."""
    if family not in SWEEP_FAMILIES:
        raise ValueError(f"sweep family must be one of {SWEEP_FAMILIES}")
    if family == "werner":
        d = 2
    jobs = [(i, float(p), family, d, test, detect_kwargs) for i, p in enumerate(params)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_sweep_point(job) for job in jobs]


def rows_to_csv(rows, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([row["verdict"] if c == "verdict" else _fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    """Parse a sweep CSV back into typed rows (comment lines skipped)."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    for rec in csv.DictReader(lines):
        out.append({k: (v if k == "verdict" else (float(v) if v != "" else None))
                    for k, v in rec.items()})
    return out


def cmd_sweep(args):
    params = np.linspace(args.start, args.stop, args.points)
    test = _test_from_args(args)
    rows = run_sweep(args.family, params, d=args.d, test=test, workers=args.workers,
                     **_detect_kwargs(args))
    header = [f"config: {json.dumps(_config(args), sort_keys=True)}",
              f"version: {version_string()}"]
    _emit(rows_to_csv(rows, header), args.out)
    return 0


def cmd_spectrum(args):
    if args.power_sums:
        p = np.array(args.power_sums, dtype=float)
        est = newton_spectrum(p, project_to_simplex=args.project)
    else:
        rho = _state_from_args(args)
        rescale = 1.0
        if args.apply_spa:
            spa = resolve_spa(args.apply_spa, rho.dims[0])
            if spa.trace_preserving:
                rho = apply_spa(spa, rho)
            else:
                rho, rescale = postselect_normalize(spa_output(spa, rho))
        m = rho.dim
        if args.mode == "exact":
            est = exact_spectrum(rho, m)
        else:
            sums, errs = [1.0], [0.0]
            for k in range(2, m + 1):
                b = args.backend
                if b == "auto":
                    b = "circuit" if m ** k <= args.cap else "analytic"
                val, err = power_trace(rho, k, shots=args.shots, backend=b, cap=args.cap,
                                       rng_seed=rng_stream(args.seed, k))
                sums.append(val)
                errs.append(err)
            est = newton_spectrum(sums, m, errors=errs)
        if args.project:
            est = replace(est, eigenvalues_projected=project_simplex(est.eigenvalues,
                                                                     est.power_sums[0]))
        if rescale != 1.0:
            sys.stderr.write(f"note: state was postselected with success probability {rescale:.6g}\n")
    payload = {"config": _config(args), "version": version_string(), "spectrum": est.to_dict()}
    _emit(_dump_json(payload), args.out)
    return 0


# --- parser ---------------------------------------------------------------

def _add_family_args(p, seed_name):
    p.add_argument("--family", choices=FAMILIES, help="state family")
    p.add_argument("--which", type=int, default=0, help="Bell index 0..3 (Phi+, Phi-, Psi+, Psi-)")
    p.add_argument("--q", type=float, help="Werner singlet weight in [0, 1]")
    p.add_argument("--f", type=float, help="isotropic singlet fraction in [0, 1]")
    p.add_argument("--d", "--dim", dest="d", type=int, default=2, help="local dimension (default: 2)")
    p.add_argument("--rank", type=int, help="rank of a random state (default: full)")
    p.add_argument("--terms", type=int, default=10, help="product terms of a random separable state")
    p.add_argument(seed_name, type=int, default=None, help="seed for random state families")


def _add_map_args(p):
    p.add_argument("--map", default="transpose", choices=sorted(BUILTIN_MAPS),
                   help="built-in positive map (default: transpose)")
    p.add_argument("--map-file", help="custom map JSON {d, choi, declared_positive}")


def _add_run_args(p):
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--shots", type=int, default=1_000_000, help="shots per power sum (sampled mode)")
    p.add_argument("--backend", choices=("auto", *BACKENDS[:2]), default="auto")
    p.add_argument("--decision-sigma", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--cap", type=int, default=DEFAULT_DENSE_CAP, help="dense dimension cap")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spadetect", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a state file")
    _add_family_args(p, "--seed")
    p.set_defaults(func=cmd_gen)
    p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("spa-info", help="summarize the SPA of a positive map")
    _add_map_args(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spa_info)

    p = sub.add_parser("detect", help="run the detection pipeline on one state")
    p.add_argument("--state", help="state JSON file")
    _add_family_args(p, "--state-seed")
    _add_map_args(p)
    _add_run_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="detect across a one-parameter family, CSV output")
    p.add_argument("--family", choices=SWEEP_FAMILIES, required=True)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=1.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--d", type=int, default=2, help="local dimension for isotropic sweeps")
    p.add_argument("--workers", type=int, default=1)
    _add_map_args(p)
    _add_run_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="reconstruct a spectrum from (simulated) power sums")
    p.add_argument("--state", help="state JSON file")
    _add_family_args(p, "--state-seed")
    p.add_argument("--power-sums", type=float, nargs="+", help="p_1 .. p_m given directly")
    p.add_argument("--apply-spa", choices=sorted(BUILTIN_MAPS), help="transform the state first")
    p.add_argument("--project", action="store_true", help="also report the simplex projection")
    _add_run_args(p)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
