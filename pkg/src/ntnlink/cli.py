"""Command line front end: config validation and metric sweeps.

Exit codes: 0 success, 1 configuration or request error, 2 evaluator failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import e2e_metrics as em
from . import monte_carlo as mc
from .fso_link import fso_params
from .rf_link import MomentMatchError, rf_params
from .scenario import ConfigError, ScenarioConfig, db2lin, derive_geometry, load_config, rf_mean_snr, table2
from .specfun import SpecfunError

COLUMNS = ("gamma_h_db", "exact", "asymptotic", "mc_estimate", "mc_stderr", "evaluator_metadata", "status")
OUTPUT_VERSION = 1
EVALUATORS = ("exact", "asymptotic", "mc")
DETECTION = {"heterodyne": 1, "imdd": 2}

log = logging.getLogger("ntnlink")


class RequestError(ValueError):
    pass


@dataclass(frozen=True)
class SweepRequest:
    metric: str
    user: str
    detection: str | None
    grid_db: tuple
    evaluators: tuple = ("exact",)
    modulation: str | None = None
    order: int = 1
    samples: int = 1_000_000
    seed: int = 0
    streams: int = 16
    output: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if not self.grid_db:
            raise RequestError("grid is empty")
        if not self.evaluators:
            raise RequestError("at least one evaluator is required")
        bad = set(self.evaluators) - set(EVALUATORS)
        if bad:
            raise RequestError(f"unknown evaluators {sorted(bad)}")
        if self.metric == "ber" and not self.modulation:
            raise RequestError("ber needs --modulation")
        if self.metric == "moments" and self.order < 1:
            raise RequestError("moment order must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise RequestError("format must be csv or json")


def parse_grid(text: str) -> tuple:
    """``start:stop:step`` in dB, stop included; or a comma list."""
    text = text.strip()
    if "," in text or ":" not in text:
        vals = [float(v) for v in text.split(",") if v.strip()]
    else:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3:
            raise RequestError("grid must be start:stop:step")
        start, stop, step = parts
        if step <= 0:
            raise RequestError("grid step must be positive")
        if stop < start:
            vals = []
        else:
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [round(start + i * step, 10) for i in range(n)]
    if not vals:
        raise RequestError("grid is empty")
    return tuple(vals)


# ---------------------------------------------------------------------------
# evaluation

def _scenario(cfg: ScenarioConfig, req: SweepRequest) -> ScenarioConfig:
    if req.detection is not None:
        cfg = cfg.replace(detection=DETECTION[req.detection])
    return cfg


def _point(args):
    """One grid row. Never raises: failures go to the status column."""
    cfg, req, gdb, fso, rf = args
    row = {"gamma_h_db": gdb, "exact": None, "asymptotic": None, "evaluator_metadata": {}, "status": "ok"}
    try:
        p = em.e2e_params(cfg, req.user, gdb, fso=fso, rf=rf)
        scheme = em.modulation(req.modulation) if req.metric == "ber" else None
        if "exact" in req.evaluators:
            if req.metric == "op":
                row["exact"] = em.outage_probability(db2lin(cfg.gamma_th_db), p)
            elif req.metric == "ber":
                row["exact"] = em.avg_ber(scheme, p)
            elif req.metric == "capacity":
                row["exact"] = em.ergodic_capacity(p)
            elif req.metric == "moments":
                row["exact"] = em.snr_moments(req.order, p)
        if "asymptotic" in req.evaluators:
            if req.metric == "op":
                row["asymptotic"] = em.e2e_cdf_asymptotic(db2lin(cfg.gamma_th_db), p)
            elif req.metric == "ber":
                row["asymptotic"] = em.avg_ber_asymptotic(scheme, p)
            else:
                row["evaluator_metadata"]["asymptotic"] = "not defined for this metric"
    except (SpecfunError, em.KernelError, ArithmeticError, ValueError) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def run_sweep(req: SweepRequest, cfg: ScenarioConfig, workers: int = 1) -> list:
    cfg = _scenario(cfg, req)
    geom = derive_geometry(cfg)
    fso = fso_params(cfg, geom)
    rf = rf_params(cfg, req.user, geom)
    tasks = [(cfg, req, g, fso, rf) for g in req.grid_db]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_point, tasks))  # map keeps grid order
    else:
        rows = [_point(t) for t in tasks]
    for row in rows:
        row["evaluator_metadata"]["fit_exact"] = rf.fit_exact
        row["mc_estimate"] = None
        row["mc_stderr"] = None
    if "mc" in req.evaluators:
        model = mc.LinkModel(fso, rf, fso.alpha_tilde, fso.beta_tilde, cfg.relay_c, db2lin(cfg.gamma_th_db),
                             modulation=em.modulation(req.modulation) if req.metric == "ber" else None,
                             moment_order=req.order)
        plan = mc.SimulationPlan(req.samples, req.seed, req.grid_db, req.metric, req.streams)
        try:
            curve = mc.simulate_metric(plan, model, workers=workers)
            for row, pt in zip(rows, curve.points):
                row["mc_estimate"] = pt.estimate
                row["mc_stderr"] = pt.stderr
                row["evaluator_metadata"]["mc_samples"] = pt.samples
                if pt.warning:
                    row["evaluator_metadata"]["mc_warning"] = pt.warning
        except (ArithmeticError, ValueError) as exc:
            for row in rows:
                row["status"] = f"error: {type(exc).__name__}: {exc}"
    return rows


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(rows: list, req: SweepRequest) -> str:
    if req.fmt == "json":
        doc = {"version": OUTPUT_VERSION, "metric": req.metric, "user": req.user,
               "columns": list(COLUMNS), "rows": [{c: r.get(c) for c in COLUMNS} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        meta = json.dumps(r["evaluator_metadata"], sort_keys=True)
        w.writerow([_fmt(r["gamma_h_db"]), _fmt(r["exact"]), _fmt(r["asymptotic"]),
                    _fmt(r["mc_estimate"]), _fmt(r["mc_stderr"]), meta, r["status"]])
    return buf.getvalue()


def read_csv(text: str) -> list:
    """Inverse of ``render`` for CSV output."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for c in COLUMNS:
            v = rec[c]
            if c == "evaluator_metadata":
                row[c] = json.loads(v)
            elif c == "status":
                row[c] = v
            else:
                row[c] = float(v) if v != "" else None
        out.append(row)
    return out


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands

def _load(path: str | None) -> ScenarioConfig:
    return load_config(path) if path else table2()


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    geom = derive_geometry(cfg)
    fso = fso_params(cfg, geom)
    report = {
        "status": "ok",
        "geometry_m": {"d_oh": geom.d_oh, "d_he": geom.d_he, "d_es": geom.d_es, **{f"d_s_{u}": v for u, v in geom.d_s.items()}},
        "rytov_variance": fso.sigma_b_sq,
        "alpha": fso.alpha, "beta": fso.beta, "alpha_tilde": fso.alpha_tilde, "beta_tilde": fso.beta_tilde,
        "q_g": fso.q_g, "varpi": fso.varpi, "a0": fso.a0, "h_p": fso.h_p,
        "diversity_order": em.diversity_order(fso),
        "users": {},
    }
    for user in ("T", "R"):
        entry = {"gamma_bar_r_db": rf_mean_snr(cfg, geom, user).gamma_bar_db}
        try:
            rf = rf_params(cfg, user, geom)
            entry.update(k=rf.k, m=rf.m, psi=rf.psi, fit_exact=rf.fit_exact)
        except MomentMatchError as exc:
            entry["error"] = str(exc)
            report["status"] = "error"
        report["users"][user] = entry
    print(json.dumps(report, indent=2))
    return 0 if report["status"] == "ok" else 1


def _request(args, metric: str) -> SweepRequest:
    evals = tuple(e.strip() for e in args.evaluators.split(",") if e.strip())
    return SweepRequest(metric=metric, user=args.user, detection=args.detection,
                        grid_db=parse_grid(args.grid), evaluators=evals,
                        modulation=getattr(args, "modulation", None), order=getattr(args, "order", 1),
                        samples=args.samples, seed=args.seed, streams=args.streams,
                        output=args.output, fmt=args.format)


def _sweep(metric: str):
    def run(args) -> int:
        req = _request(args, metric)
        cfg = _load(args.config)
        rows = run_sweep(req, cfg, workers=args.workers or mc.workers_from_env())
        _emit(render(rows, req), req.output)
        return 2 if any(r["status"] != "ok" for r in rows) else 0
    return run


def cmd_diversity(args) -> int:
    cfg = _load(args.config)
    if args.detection:
        cfg = cfg.replace(detection=DETECTION[args.detection])
    print(repr(em.diversity_order(fso_params(cfg))))
    return 0


def cmd_mc_validate(args) -> int:
    metric = args.metric
    args.evaluators = "exact,mc"
    req = _request(args, metric)
    cfg = _load(args.config)
    rows = run_sweep(req, cfg, workers=args.workers or mc.workers_from_env())
    worst = 0.0
    for r in rows:
        if r["status"] != "ok":
            continue
        se = r["mc_stderr"]
        if metric == "op":
            p = min(max(r["exact"], 0.0), 1.0)
            se = max(se, math.sqrt(p * (1 - p) / req.samples))
        z = (r["mc_estimate"] - r["exact"]) / se if se > 0 else (0.0 if r["mc_estimate"] == r["exact"] else math.inf)
        r["evaluator_metadata"]["z"] = z
        worst = max(worst, abs(z))
    _emit(render(rows, req), req.output)
    print(f"max |exact - mc| / stderr = {worst:.3f} over {len(rows)} points", file=sys.stderr)
    return 2 if any(r["status"] != "ok" for r in rows) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntnlink", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file and print derived quantities")
    v.add_argument("config", nargs="?", help="scenario JSON (default: packaged reference scenario)")
    v.set_defaults(func=cmd_validate)

    def common(p, with_metric_opts=True):
        p.add_argument("--config", help="scenario JSON (default: packaged reference scenario)")
        p.add_argument("--user", choices=("T", "R"), default="R")
        p.add_argument("--detection", choices=tuple(DETECTION), default=None,
                       help="override the detection of the config")
        p.add_argument("--grid", default="20:60:2", help="gamma_H grid in dB, start:stop:step")
        p.add_argument("--evaluators", default="exact", help="comma list of exact, asymptotic, mc")
        p.add_argument("--samples", type=int, default=1_000_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--streams", type=int, default=16)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${mc.WORKERS_ENV} or 1)")
        p.add_argument("--output", "-o", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    for name, metric in (("op-sweep", "op"), ("ber-sweep", "ber"), ("capacity-sweep", "capacity"),
                         ("moments", "moments")):
        p = sub.add_parser(name, help=f"{metric} versus gamma_H")
        common(p)
        if metric == "ber":
            p.add_argument("--modulation", required=True, help="OOK, BPSK, 16-PSK, 16-QAM, 64-QAM, ...")
        if metric == "moments":
            p.add_argument("--order", type=int, default=1)
        p.set_defaults(func=_sweep(metric))

    d = sub.add_parser("diversity", help="diversity order of the configured link")
    d.add_argument("--config")
    d.add_argument("--detection", choices=tuple(DETECTION), default=None)
    d.set_defaults(func=cmd_diversity)

    m = sub.add_parser("mc-validate", help="closed form against Monte Carlo on a grid")
    common(m)
    m.add_argument("--metric", choices=mc.METRICS, default="op")
    m.add_argument("--modulation", default=None)
    m.add_argument("--order", type=int, default=1)
    m.set_defaults(func=cmd_mc_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"status": "config-error", "problems": exc.problems}, indent=2), file=sys.stderr)
        return 1
    except (RequestError, MomentMatchError) as exc:
        print(json.dumps({"status": "request-error", "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"status": "config-error", "problems": {"<file>": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
