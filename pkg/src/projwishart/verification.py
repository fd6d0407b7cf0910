"""Monte Carlo experiments that check projective Wishart laws against theory.

Each experiment is a pure function of its :class:`ExperimentSpec`; random
draws come from ``RngStream(spec.seed, stream)`` with a fixed stream id per
purpose, so rerunning an experiment reproduces its report exactly (apart
from the ``timing`` block).

Experiments marked ``expect: "reject"`` are negative controls: they pass
when their statistical check fails.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .densities import RadialLaw
from .frechet import MeanConfig, karcher_mean
from .geometry import distance, group_act
from .matrix_core import field_constant, herm
from .rng import RngStream
from .sampling import (
    WishartParams,
    conjugate_stabilizer,
    random_spd,
    sample_projective_wishart,
    sample_stabilizer,
)
from .serialization import atomic_write_text, to_jsonable

__all__ = [
    "ExperimentSpec",
    "ExperimentReport",
    "Check",
    "ks_1samp",
    "ks_2samp",
    "kolmogorov_sf",
    "run_frechet_experiment",
    "run_radial_ks_experiment",
    "run_invariance_experiment",
    "run_density_consistency_experiment",
    "run_experiment",
    "run_suite",
    "load_config",
    "default_config_path",
    "CONFIG_SCHEMA",
]

KINDS = ("frechet", "radial_ks", "invariance", "density_consistency")


# ----------------------------------------------------------------------------
# Kolmogorov-Smirnov


def kolmogorov_sf(lam, terms: int = 100):
    """Survival function of the Kolmogorov distribution,
    ``2 sum_j (-1)^(j-1) exp(-2 j^2 lam^2)``, clipped to [0, 1].
    """
    lam = np.asarray(lam, dtype=float)
    j = np.arange(1, terms + 1)
    series = 2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * np.multiply.outer(lam ** 2, j ** 2)), axis=-1)
    # the alternating series is useless for small lam, where the answer is 1
    return np.where(lam < 0.2, 1.0, np.clip(series, 0.0, 1.0))


def ks_1samp(sample, cdf):
    """One-sample KS statistic and asymptotic p-value.

    ``cdf`` maps an array of sample values to model probabilities.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    sq = np.sqrt(n)
    return D, float(kolmogorov_sf((sq + 0.12 + 0.11 / sq) * D))


def ks_2samp(a, b):
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    allv = np.concatenate([a, b])
    Fa = np.searchsorted(a, allv, side="right") / a.size
    Fb = np.searchsorted(b, allv, side="right") / b.size
    D = float(np.max(np.abs(Fa - Fb)))
    ne = a.size * b.size / (a.size + b.size)
    sq = np.sqrt(ne)
    return D, float(kolmogorov_sf((sq + 0.12 + 0.11 / sq) * D))


# ----------------------------------------------------------------------------
# Specs and reports

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiments"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "integer"},
        "output_dir": {"type": "string"},
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "kind", "d", "field", "n", "N", "seed"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": list(KINDS)},
                    "d": {"type": "integer", "minimum": 2},
                    "field": {"enum": ["real", "complex"]},
                    "n": {"type": "integer", "minimum": 1},
                    "N": {"type": "integer", "minimum": 100},
                    "seed": {"type": "integer", "minimum": 0},
                    "sigma": {
                        "anyOf": [
                            {"enum": ["identity", "random"]},
                            {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                            {"type": "object", "required": ["re"],
                             "properties": {"re": {"type": "array"}, "im": {"type": "array"}}},
                        ]
                    },
                    "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "tolerance": {"type": "number", "exclusiveMinimum": 0},
                    "expect": {"enum": ["pass", "reject"]},
                    "options": {"type": "object"},
                },
            },
        },
    },
}


@dataclass
class ExperimentSpec:
    id: str
    kind: str
    d: int
    field: str
    n: int
    N: int
    seed: int
    sigma: object = "identity"
    alpha: float = 0.01
    tolerance: float | None = None
    expect: str = "pass"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        field_constant(self.field)
        if self.N < 100:
            raise ValueError("N must be at least 100")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.expect not in ("pass", "reject"):
            raise ValueError("expect must be 'pass' or 'reject'")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        return cls(**obj)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: object
    relation: str


@dataclass
class ExperimentReport:
    id: str
    kind: str
    expect: str
    passed: bool
    checks_passed: bool
    checks: list
    stats: dict
    provenance: dict
    side_files: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))


def _check(name, value, threshold, relation) -> Check:
    value = float(value)
    if relation == "<=":
        ok = value <= threshold
    elif relation == ">=":
        ok = value >= threshold
    elif relation == "<":
        ok = value < threshold
    elif relation == "in":
        ok = threshold[0] <= value <= threshold[1]
    else:
        raise ValueError(relation)
    return Check(name, bool(ok), value, threshold, relation)


def resolve_sigma(spec: ExperimentSpec, index: int = 0) -> np.ndarray:
    """Covariance for replicate ``index``; random draws use stream ``1000 + index``."""
    s = spec.sigma
    if isinstance(s, str):
        if s == "identity":
            return np.eye(spec.d, dtype=complex if spec.field == "complex" else float)
        if s == "random":
            return random_spd(spec.d, spec.field, RngStream(spec.seed, 1000 + index))
        raise ValueError(f"unknown sigma {s!r}")
    if isinstance(s, dict):
        re = np.asarray(s["re"], dtype=float)
        im = np.asarray(s.get("im", np.zeros_like(re)), dtype=float)
        M = re + 1j * im if spec.field == "complex" else re
    else:
        M = np.asarray(s, dtype=complex if spec.field == "complex" else float)
    M = M.reshape(spec.d, spec.d)
    return M


def _provenance(spec: ExperimentSpec) -> dict:
    return {
        "seed": spec.seed,
        "version": f"projwishart-{__version__}",
        "spec": asdict(spec),
    }


def _finish(spec, checks, stats, side_files, started) -> ExperimentReport:
    ok = all(c.passed for c in checks)
    passed = ok if spec.expect == "pass" else not ok
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = datetime.fromtimestamp(int(epoch) if epoch else time.time(), tz=timezone.utc)
    timing = {"finished_utc": stamp.isoformat(), "elapsed_s": round(time.perf_counter() - started, 3)}
    return ExperimentReport(spec.id, spec.kind, spec.expect, passed, ok,
                            [asdict(c) for c in checks], to_jsonable(stats),
                            to_jsonable(_provenance(spec)), side_files, timing)


def _write_csv(out_dir, name, header, rows) -> str | None:
    if out_dir is None:
        return None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(out_dir) / name
    atomic_write_text(path, buf.getvalue())
    return str(path)


# ----------------------------------------------------------------------------
# Experiments


def run_frechet_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Distance from the sample Karcher mean to ``sigma_bar``.

    For each of ``options.n_sigma`` covariances (default 3), draws ``N``
    samples and solves for the mean of the full batch and of its four
    disjoint quarters. The rate probe is the ratio of the RMS full-batch
    distance to the RMS quarter distance, pooled over covariances, which is
    1/2 under square-root-N convergence.
    """
    started = time.perf_counter()
    opts = spec.options
    tol = spec.tolerance if spec.tolerance is not None else 0.02
    n_sigma = int(opts.get("n_sigma", 3))
    bounds = list(opts.get("ratio_bounds", [0.3, 0.8]))
    cfg = MeanConfig(grad_tol=float(opts.get("grad_tol", 1e-9)),
                     max_iters=int(opts.get("max_iters", 200)))
    quarter = spec.N // 4

    checks, rows, per_sigma = [], [], []
    full_d, quarter_d = [], []
    all_converged = True
    for j in range(n_sigma):
        p = WishartParams(resolve_sigma(spec, j), spec.n, spec.field)
        x = sample_projective_wishart(p, RngStream(spec.seed, j), spec.N)
        target = p.sigma_bar
        res = karcher_mean(x, cfg=cfg)
        dN = float(distance(target, res.mean))
        all_converged &= res.converged
        rows.append((j, "full", spec.N, dN, res.iterations, res.final_grad_norm))
        dq = []
        for q in range(4):
            rq = karcher_mean(x[q * quarter:(q + 1) * quarter], cfg=cfg)
            all_converged &= rq.converged
            dq.append(float(distance(target, rq.mean)))
            rows.append((j, f"quarter{q}", quarter, dq[-1], rq.iterations, rq.final_grad_norm))
        full_d.append(dN)
        quarter_d.extend(dq)
        per_sigma.append({"index": j, "distance_N": dN, "distance_quarters": dq,
                          "iterations": res.iterations, "sigma_det": float(np.real(np.linalg.det(p.sigma)))})
        checks.append(_check(f"distance_N[sigma{j}]", dN, tol, "<="))

    ratio = float(np.sqrt(np.mean(np.square(full_d))) / np.sqrt(np.mean(np.square(quarter_d))))
    checks.append(_check("rate_ratio", ratio, bounds, "in"))
    checks.append(_check("all_converged", float(all_converged), 1.0, ">="))
    side = _write_csv(out_dir, f"{spec.id}_convergence.csv",
                      ["sigma_index", "subset", "size", "distance", "iterations", "grad_norm"], rows)
    stats = {"per_sigma": per_sigma, "rate_ratio": ratio, "N": spec.N, "quarter_size": quarter}
    return _finish(spec, checks, stats, [s for s in [side] if s], started)


def run_radial_ks_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """One-sample KS test of ``d(x_i, sigma_bar)`` against the 2x2 radial law.

    ``options.law_n_offset`` shifts the law's ``n`` (negative controls).
    """
    started = time.perf_counter()
    if spec.d != 2:
        raise ValueError("the radial KS experiment needs d = 2")
    offset = spec.options.get("law_n_offset", 0)
    p = WishartParams(resolve_sigma(spec), spec.n, spec.field)
    x = sample_projective_wishart(p, RngStream(spec.seed, 0), spec.N)
    r = distance(p.sigma_bar, x)
    law = RadialLaw(p.k, p.n + offset)
    D, pval = ks_1samp(r, law.cdf)
    checks = [_check("ks_p_value", pval, spec.alpha, ">=")]

    top = float(np.quantile(r, 0.999))
    edges = np.linspace(0.0, top, 41)
    counts, _ = np.histogram(r, edges)
    dens = counts / (spec.N * np.diff(edges))
    mids = 0.5 * (edges[1:] + edges[:-1])
    rows = zip(edges[:-1], edges[1:], dens, law.pdf(mids))
    side = _write_csv(out_dir, f"{spec.id}_radial_hist.csv",
                      ["r_lo", "r_hi", "empirical_density", "law_pdf_mid"], rows)
    stats = {"ks_statistic": D, "p_value": pval, "law_k": law.k, "law_n": law.n,
             "mean_r": float(np.mean(r)), "law_mean_r": law.mean()}
    return _finish(spec, checks, stats, [s for s in [side] if s], started)


def run_invariance_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Stabilizer invariance of projective Wishart samples.

    Deterministic part: a conjugated stabilizer element preserves every
    sample's distance to ``sigma_bar`` (and hence every histogram bin), and
    fixes ``sigma_bar`` itself, while moving points away from it. Statistical
    part: two-sample KS between the first diagonal entry of one batch and
    of an independent batch pushed through the same element.

    With ``options.control = "wrong_sigma"`` the element is conjugated by an
    unrelated covariance and only the KS check is run.
    """
    started = time.perf_counter()
    opts = spec.options
    tol = spec.tolerance if spec.tolerance is not None else 1e-9
    control = opts.get("control", "none")
    p = WishartParams(resolve_sigma(spec), spec.n, spec.field)
    sbar = p.sigma_bar
    x = sample_projective_wishart(p, RngStream(spec.seed, 0), spec.N)
    x2 = sample_projective_wishart(p, RngStream(spec.seed, 1), spec.N)
    grng = RngStream(spec.seed, 2)
    R = sample_stabilizer(spec.field, spec.d, grng)
    conj_sigma = p.sigma
    if control == "wrong_sigma":
        conj_sigma = random_spd(spec.d, spec.field, RngStream(spec.seed, 3), spread=1.0)
    RS = conjugate_stabilizer(R, conj_sigma)

    checks = []
    stats = {"control": control}
    if control == "none":
        d_before = distance(sbar, x)
        d_after = distance(sbar, group_act(RS, x))
        dev = float(np.max(np.abs(d_before - d_after)))
        edges = np.linspace(0.0, 1.001 * float(max(d_before.max(), d_after.max())), 31)
        hist_equal = np.array_equal(np.histogram(d_before, edges)[0], np.histogram(d_after, edges)[0])
        checks.append(_check("isometry_max_deviation", dev, tol, "<="))
        checks.append(_check("histogram_bins_equal", float(hist_equal), 1.0, ">="))

        Rs = sample_stabilizer(spec.field, spec.d, grng, int(opts.get("fixed_point_draws", 100)))
        RSs = conjugate_stabilizer(Rs, p.sigma)
        fp_dev = float(np.max(np.abs(group_act(RSs, sbar) - sbar)))
        checks.append(_check("fixed_point_max_deviation", fp_dev, tol, "<="))
        # other points are moved: the orbit of y is a sphere around sigma_bar
        y = x[:10]
        moved = np.array([np.max(distance(y[i], group_act(RSs, y[i]))) for i in range(y.shape[0])])
        radius = distance(sbar, y)
        checks.append(_check("non_fixed_points_moved", float(np.min(moved / radius)), 0.5, ">="))
        stats.update(isometry_max_deviation=dev, fixed_point_max_deviation=fp_dev,
                     min_relative_displacement=float(np.min(moved / radius)))

    a = np.real(x[:, 0, 0])
    b = np.real(group_act(RS, x2)[:, 0, 0])
    D, pval = ks_2samp(a, b)
    checks.append(_check("ks2_p_value", pval, spec.alpha, ">="))
    stats.update(ks_statistic=D, p_value=pval)
    return _finish(spec, checks, stats, [], started)


def run_density_consistency_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Binned test of the trace-form density in any dimension.

    The functional is ``t = tr(sigma^-1 x)``. Expected bin masses for
    ``PW(sigma, n)`` come from an independent reference sample of
    ``PW(sigma, n_ref)`` reweighted by the density ratio
    ``t^(-d k (n - n_ref) / 2)``, in which the invariant volume cancels.
    Consecutive bin pairs are compared on the log scale, which removes the
    unknown normalizers, with a z-score combining the multinomial error of
    the observed counts and the importance-sampling error of the
    prediction. Bins (quantiles of the reference sample) with fewer than
    ``options.min_count`` observed or reference points are excluded.

    ``options.control``: ``"shuffled"`` permutes the predicted bin masses,
    ``"wrong_n"`` reweights with ``n + 3``.
    """
    started = time.perf_counter()
    opts = spec.options
    control = opts.get("control", "none")
    nbins = int(opts.get("bins", 20))
    min_count = int(opts.get("min_count", 50))
    zmax = float(opts.get("z_max", 3.0))
    n_ref = int(opts.get("n_ref", max(spec.d, spec.n - 2)))
    N_ref = int(opts.get("N_ref", spec.N))
    sigma = resolve_sigma(spec)
    p = WishartParams(sigma, spec.n, spec.field)
    pref = WishartParams(sigma, n_ref, spec.field)
    if n_ref >= spec.n:
        raise ValueError("the reference law needs fewer degrees of freedom than the target")

    def functional(pts):
        s = np.linalg.inv(p.sigma)
        return np.real(np.trace(s @ pts, axis1=-2, axis2=-1))

    t_obs = functional(sample_projective_wishart(p, RngStream(spec.seed, 0), spec.N))
    t_ref = functional(sample_projective_wishart(pref, RngStream(spec.seed, 1), N_ref))
    n_weight = spec.n + 3 if control == "wrong_n" else spec.n
    logw = -0.5 * spec.d * p.k * (n_weight - n_ref) * np.log(t_ref)
    w = np.exp(logw - logw.max())

    # equal-mass bins of the reference sample, so observed counts carry the signal
    inner = np.quantile(t_ref, np.arange(1, nbins) / nbins)
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    obs = np.histogram(t_obs, edges)[0].astype(float)
    idx = np.clip(np.searchsorted(edges, t_ref, side="right") - 1, 0, nbins - 1)
    u = np.bincount(idx, weights=w, minlength=nbins)
    u2 = np.bincount(idx, weights=w * w, minlength=nbins)
    ref_counts = np.bincount(idx, minlength=nbins)
    if control == "shuffled":
        perm = _derangement(nbins, RngStream(spec.seed, 2))
        u, u2, ref_counts = u[perm], u2[perm], ref_counts[perm]

    keep = (obs >= min_count) & (ref_counts >= min_count)
    kept = np.nonzero(keep)[0]
    rows, zs = [], []
    for a_, b_ in zip(kept[:-1], kept[1:]):
        lo = np.log(obs[b_] / obs[a_])
        lp = np.log(u[b_] / u[a_])
        var = 1.0 / obs[a_] + 1.0 / obs[b_] + u2[a_] / u[a_] ** 2 + u2[b_] / u[b_] ** 2
        z = (lo - lp) / np.sqrt(var)
        zs.append(z)
        rows.append((a_, b_, edges[b_], obs[a_], obs[b_], u[a_] / u.sum() * spec.N,
                     u[b_] / u.sum() * spec.N, lo, lp, z))
    if not zs:
        raise ValueError("every bin is under-populated")
    max_abs_z = float(np.max(np.abs(zs)))
    checks = [_check("max_abs_z", max_abs_z, zmax, "<=")]
    side = _write_csv(out_dir, f"{spec.id}_bin_ratios.csv",
                      ["bin_a", "bin_b", "edge", "obs_a", "obs_b", "pred_a", "pred_b",
                       "obs_log_ratio", "pred_log_ratio", "z"], rows)
    stats = {"control": control, "n_ref": n_ref, "N_ref": N_ref, "bins": nbins,
             "excluded_bins": [int(i) for i in np.nonzero(~keep)[0]],
             "max_abs_z": max_abs_z, "pairs": len(zs)}
    return _finish(spec, checks, stats, [s for s in [side] if s], started)


def _derangement(m, rng):
    """Random permutation of ``range(m)`` without fixed points."""
    while True:
        perm = np.argsort(rng.uniform(m), kind="stable")
        if np.all(perm != np.arange(m)):
            return perm


RUNNERS = {
    "frechet": run_frechet_experiment,
    "radial_ks": run_radial_ks_experiment,
    "invariance": run_invariance_experiment,
    "density_consistency": run_density_consistency_experiment,
}


def run_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    return RUNNERS[spec.kind](spec, out_dir)


# ----------------------------------------------------------------------------
# Config files and suites


def default_config_path() -> Path:
    return Path(str(resources.files("projwishart") / "data" / "default_verify.json"))


def load_config(path) -> dict:
    """Read and schema-validate a verification config.

    Raises ``jsonschema.ValidationError`` or ``ValueError`` on bad content
    and ``OSError`` when the file cannot be read.
    """
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from None
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    ids = [e["id"] for e in cfg["experiments"]]
    if len(set(ids)) != len(ids):
        raise ValueError("experiment ids must be unique")
    cfg["experiments"] = [ExperimentSpec.from_dict(e) for e in cfg["experiments"]]
    return cfg


def _run_one(args):
    spec, out_dir = args
    return run_experiment(spec, out_dir)


def run_suite(specs, out_dir=None, jobs: int = 1) -> list[ExperimentReport]:
    """Run experiments, optionally in worker processes; results keep input order."""
    work = [(s, out_dir) for s in specs]
    if jobs <= 1 or len(work) <= 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, work))


def suite_summary(reports) -> dict:
    return {
        "passed": all(r.passed for r in reports),
        "n_experiments": len(reports),
        "n_failed": sum(not r.passed for r in reports),
        "experiments": {r.id: r.to_dict() for r in reports},
    }
