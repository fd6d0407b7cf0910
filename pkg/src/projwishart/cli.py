"""Command-line interface.

Exit codes: 0 success, 1 statistical failure (or a mean that did not
converge), 2 usage or input error, 3 I/O error. Data goes to stdout or the
requested files; the effective configuration is echoed to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .densities import (
    normalize_density_2d,
    projective_logdensity_cosh,
    projective_logdensity_trace,
    RadialLaw,
)
from .frechet import MeanConfig, karcher_mean
from .geometry import DEFAULT_SCALE, as_spd, distance, project
from .matrix_core import field_constant, matrix_from_json, matrix_to_json
from .rng import RngStream
from .sampling import WishartParams, sample_projective_wishart, sample_wishart
from .serialization import (
    BatchFormatError,
    atomic_write_text,
    dumps_line,
    point_to_json,
    read_batch,
    write_batch,
)
from .verification import default_config_path, load_config, run_suite, suite_summary

EXIT_OK, EXIT_STAT, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


# ----------------------------------------------------------------------------
# argument helpers


def parse_matrix(text: str, d: int | None = None, field: str | None = None) -> np.ndarray:
    """``identity``, an inline JSON matrix, or a path to a JSON file."""
    if text == "identity":
        if d is None:
            raise UsageError("--sigma identity needs --d")
        return np.eye(d, dtype=complex if field == "complex" else float)
    stripped = text.lstrip()
    if stripped.startswith(("[", "{")):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON matrix: {exc.msg}") from None
    else:
        try:
            obj = json.loads(Path(text).read_text())
        except FileNotFoundError:
            raise UsageError(f"matrix file not found: {text}") from None
        except OSError as exc:
            raise IOFailure(str(exc)) from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON in {text}: {exc.msg}") from None
    try:
        if isinstance(obj, dict) and "dim" in obj:
            M = matrix_from_json(obj)
        elif isinstance(obj, dict):
            re = np.asarray(obj["re"], dtype=float)
            M = re + 1j * np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        else:
            M = np.asarray(obj, dtype=complex if field == "complex" else float)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot read matrix: {exc}") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise UsageError(f"matrix must be square, got shape {M.shape}")
    if d is not None and M.shape[0] != d:
        raise UsageError(f"matrix is {M.shape[0]}x{M.shape[0]} but --d is {d}")
    if field == "real" and np.iscomplexobj(M):
        if np.any(M.imag):
            raise UsageError("complex matrix given for the real field")
        M = M.real
    if field == "complex":
        M = M.astype(complex)
    return M


def parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError("--grid expects start:stop:step") from None
    if step <= 0 or hi < lo or lo < 0:
        raise UsageError("--grid needs 0 <= start <= stop and step > 0")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def _params(args) -> WishartParams:
    sigma = parse_matrix(args.sigma, args.d, args.field)
    try:
        return WishartParams(sigma, args.n, args.field)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_lines(path: str):
    if path == "-":
        return sys.stdin.read().splitlines()
    try:
        return Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}") from None
    except OSError as exc:
        raise IOFailure(str(exc)) from None


def _load_points(path: str):
    try:
        return read_batch(_read_lines(path))
    except BatchFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        atomic_write_text(out, text)
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc}") from None


def _echo_config(args) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    print(json.dumps({"projwishart": __version__, "config": cfg}, sort_keys=True), file=sys.stderr)


# ----------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> int:
    p = _params(args)
    if p.n < p.d:
        raise UsageError(f"need n >= d (n={p.n}, d={p.d})")
    if args.count < 1:
        raise UsageError("--count must be positive")
    rng = RngStream(args.seed, args.stream)
    sampler = sample_projective_wishart if args.kind == "unit_det" else sample_wishart
    pts = sampler(p, rng, args.count)
    header = {"params": p.to_dict(), "seed": args.seed, "stream": args.stream}
    buf = io.StringIO()
    write_batch(buf, pts, header, args.kind)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_project(args) -> int:
    header, pts = _load_points(args.input)
    try:
        out = project(as_spd(pts))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    write_batch(buf, out, {"source": header}, "unit_det")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_distance(args) -> int:
    ref = parse_matrix(args.ref)
    try:
        ref = project(as_spd(ref))
        if args.input is not None:
            _, pts = _load_points(args.input)
            if pts.shape[-1] != ref.shape[-1]:
                raise UsageError("reference and points differ in dimension")
            dist = np.atleast_1d(distance(ref, project(as_spd(pts)), args.scale))
        elif args.y is not None:
            y = project(as_spd(parse_matrix(args.y)))
            dist = np.atleast_1d(distance(ref, y, args.scale))
        else:
            raise UsageError("give --in FILE or --y MATRIX")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "distance"])
    for i, v in enumerate(dist):
        w.writerow([i, repr(float(v))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_mean(args) -> int:
    _, pts = _load_points(args.input)
    try:
        cfg = MeanConfig(max_iters=args.max_iters, grad_tol=args.grad_tol, scale=args.scale)
        pts = project(as_spd(pts))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = karcher_mean(pts, cfg=cfg)
    _emit(json.dumps(res.to_dict()) + "\n", args.out)
    return EXIT_OK if res.converged else EXIT_STAT


def cmd_density(args) -> int:
    k = field_constant(args.field)
    if args.normalized and args.d != 2:
        raise UsageError("normalized densities exist for d = 2 only")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.points is not None:
        p = _params(args)
        if p.n < p.d:
            raise UsageError(f"need n >= d (n={p.n}, d={p.d})")
        _, pts = _load_points(args.points)
        try:
            pts = project(as_spd(pts))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if pts.shape[-1] != p.d:
            raise UsageError("points do not match --d")
        cols = ["index", "log_density_trace"]
        vals = [np.atleast_1d(projective_logdensity_trace(pts, p).log_value)]
        if p.d == 2:
            cosh = np.atleast_1d(projective_logdensity_cosh(pts, p).log_value)
            cols.append("log_density_cosh")
            vals.append(cosh)
            if args.normalized:
                cols.append("log_density_normalized")
                vals.append(cosh + np.log(normalize_density_2d(p)))
        w.writerow(cols)
        for i, row in enumerate(zip(*vals)):
            w.writerow([i] + [repr(float(v)) for v in row])
    else:
        if args.d != 2:
            raise UsageError("radial curves exist for d = 2 only; use --points for trace-form values")
        if args.grid is None:
            raise UsageError("give --grid start:stop:step or --points FILE")
        try:
            law = RadialLaw(k, args.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        r = parse_grid(args.grid)
        w.writerow(["r", "pdf", "cdf", "log_pdf"])
        for row in zip(r, law.pdf(r), law.cdf(r), law.logpdf(r)):
            w.writerow([repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    path = Path(args.config) if args.config else default_config_path()
    if not path.exists():
        raise UsageError(f"config not found: {path}")
    try:
        cfg = load_config(path)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config schema error at {loc}: {exc.message}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    except OSError as exc:
        raise IOFailure(str(exc)) from None
    out_dir = Path(args.out_dir or cfg.get("output_dir", "verify_out"))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {out_dir}: {exc}") from None
    reports = run_suite(cfg["experiments"], out_dir, jobs=args.jobs)
    summary = suite_summary(reports)
    try:
        atomic_write_text(out_dir / "report.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IOFailure(str(exc)) from None
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        note = " (negative control)" if r.expect == "reject" else ""
        print(f"{status} {r.id}{note}", file=sys.stderr)
    print(f"report: {out_dir / 'report.json'}", file=sys.stderr)
    return EXIT_OK if summary["passed"] else EXIT_STAT


def cmd_report(args) -> int:
    try:
        summary = json.loads(Path(args.report).read_text())
    except FileNotFoundError:
        raise UsageError(f"report not found: {args.report}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"report is not JSON: {exc.msg}") from None
    except OSError as exc:
        raise IOFailure(str(exc)) from None
    try:
        exps = summary["experiments"]
        lines = []
        for eid in sorted(exps):
            e = exps[eid]
            lines.append(f"{'PASS' if e['passed'] else 'FAIL'}  {eid}  [{e['kind']}, expect {e['expect']}]")
            for c in e["checks"]:
                mark = "ok " if c["passed"] else "bad"
                lines.append(f"    {mark} {c['name']}: {c['value']:.6g} {c['relation']} {c['threshold']}")
        lines.append(f"overall: {'PASS' if summary['passed'] else 'FAIL'} "
                     f"({summary['n_failed']} of {summary['n_experiments']} failed)")
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed report: {exc}") from None
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if summary["passed"] else EXIT_STAT


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="projwishart", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"projwishart {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def wishart_flags(sp, need_n=True):
        sp.add_argument("--d", type=int, required=True)
        sp.add_argument("--field", choices=["real", "complex"], default="real")
        sp.add_argument("--n", type=int, required=need_n)
        sp.add_argument("--sigma", default="identity",
                        help="'identity', an inline JSON matrix, or a JSON file path")

    sp = sub.add_parser("sample", help="draw Wishart or projective Wishart samples as JSON lines")
    wishart_flags(sp)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--kind", choices=["unit_det", "spd"], default="unit_det")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("project", help="map positive definite matrices to determinant one")
    sp.add_argument("input", help="JSON-lines file or '-' for stdin")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("distance", help="affine-invariant distances to a reference matrix")
    sp.add_argument("--ref", required=True, help="reference matrix (JSON literal or file)")
    sp.add_argument("--in", dest="input", help="JSON-lines batch or '-'")
    sp.add_argument("--y", help="single matrix (JSON literal or file)")
    sp.add_argument("--scale", type=float, default=DEFAULT_SCALE)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_distance)

    sp = sub.add_parser("mean", help="Karcher mean of a JSON-lines batch")
    sp.add_argument("input", help="JSON-lines file or '-' for stdin")
    sp.add_argument("--grad-tol", type=float, default=1e-9)
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--scale", type=float, default=DEFAULT_SCALE)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_mean)

    sp = sub.add_parser("density", help="radial density curves (d=2) or trace-form values")
    wishart_flags(sp)
    sp.add_argument("--grid", help="start:stop:step for the radial curve")
    sp.add_argument("--points", help="JSON-lines batch to evaluate densities at")
    sp.add_argument("--normalized", action="store_true")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("config", nargs="?", help="JSON config (default: the shipped suite)")
    sp.add_argument("--out-dir")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="summarize a verification report")
    sp.add_argument("report")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
