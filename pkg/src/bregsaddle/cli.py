"""Command-line experiment runner.

::

    bregsaddle solve CONFIG [CONFIG ...] [--out-dir D] [--check all|none|LIST] [--jobs N]
    bregsaddle compare A.json B.json [--tol 1e-12]
    bregsaddle validate-schedule CONFIG --horizon K

A config is one JSON document::

    {
      "problem":   {"kind": "bilinear", "m": 10, "n": 10, "seed": 42, "scale": 1.0}
                   | {"kind": ..., "A": [[...]], "b": [...], "c": [...], ...}
                   | {"file": "instance.json"},
      "generator": {"kind": "euclidean"} | {"kind": "augmented_l1", "gamma": 0.5}
                   | {"kind": "prox_regularized", "psi": "zero|l1|half_sq", "gamma": 1.0},
      "method":    "beg" | "bep" | "eg_reference" | "ogda_reference",
      "schedule":  {"kind": "constant", "safety": 1.0, "lambda": null, "lipschitz": "blocks|estimate"}
                   | {"kind": "explicit", "alpha": [...], "beta": [...], "lambda": null},
      "init": "zeros" | "ones" | [...],
      "max_iters": 100, "tol": null, "stride": 1,
      "checks": "all" | "none" | ["regret", "telescoped", "distance", "gap"],
      "out_dir": "out", "write_vectors": true, "record_wall_time": true
    }

``trace.csv`` columns: ``k`` (iterate index), ``alpha``/``beta`` (step that
produced it, empty on row 0), ``resid_norm`` (``||F(u_bar)||`` for BEG,
``||F(u_k)||`` otherwise), ``value_error`` and ``gap_bound`` of the averaged
iterate (empty without a saddle oracle), ``dist_to_saddle``
(``D(z_bar, u_k; u*_k)``) and ``sparsity_fraction`` (exact zeros in ``u_k``).

Exit status: 0 on success, 2 when a diagnostic (or an equivalence
comparison) fails, 1 on configuration or runtime errors.
"""

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from bregsaddle import bregman, diagnostics, operators, problems, solvers
from bregsaddle.errors import BregsaddleError, InvalidArgument

log = logging.getLogger("bregsaddle")

TRACE_COLUMNS = ("k", "alpha", "beta", "resid_norm", "value_error", "gap_bound", "dist_to_saddle",
                 "sparsity_fraction")
METHOD_NAMES = {"beg": "BEG", "bep": "BEP", "eg_reference": "EG", "ogda_reference": "OGDA"}
EQUIVALENT = {frozenset(("beg", "eg_reference")), frozenset(("bep", "ogda_reference"))}

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class ConfigError(BregsaddleError, ValueError):
    pass


def load_config(path):
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    cfg.setdefault("_base", str(path.parent))
    return cfg


def _field(cfg, name, default=None, required=False):
    if name not in cfg:
        if required:
            raise ConfigError(f"missing config field {name!r}")
        return default
    return cfg[name]


def build_problem(spec, base="."):
    if not isinstance(spec, dict):
        raise ConfigError("field 'problem' must be an object")
    if "file" in spec:
        p = Path(base) / spec["file"]
        try:
            return problems.instance_from_json(p.read_text())
        except OSError as exc:
            raise ConfigError(f"problem.file: cannot read {p}") from exc
    kind = spec.get("kind")
    if "A" in spec:
        doc = dict(spec)
        A = np.atleast_2d(np.array(spec["A"], dtype=float))
        doc.setdefault("m", A.shape[0])
        doc.setdefault("n", A.shape[1])
        try:
            return problems.instance_from_dict(doc)
        except KeyError as exc:
            raise ConfigError(f"problem: missing field {exc.args[0]!r}") from exc
    try:
        dims = (int(spec["m"]), int(spec["n"]))
        seed = int(spec["seed"])
    except KeyError as exc:
        raise ConfigError(f"problem: missing field {exc.args[0]!r}") from exc
    return problems.random_instance(kind, dims, seed, float(spec.get("scale", 1.0)))


def build_generator(spec, dimension):
    spec = spec or {"kind": "euclidean"}
    kind = spec.get("kind", "euclidean")
    if kind == "euclidean":
        return bregman.euclidean_generator(dimension)
    if kind == "augmented_l1":
        if "gamma" not in spec:
            raise ConfigError("generator.gamma is required for augmented_l1")
        return bregman.augmented_l1_generator(dimension, float(spec["gamma"]))
    if kind == "prox_regularized":
        psi = spec.get("psi", "zero")
        gamma = float(spec.get("gamma", 1.0))
        ev, prox, sub = bregman.named_psi(psi, gamma)
        return bregman.prox_regularized_generator(dimension, ev, prox, sub, params={"psi": psi, "gamma": gamma})
    raise ConfigError(f"generator.kind: unknown generator {kind!r}")


def _lambda_for(spec, op, gen, dimension):
    if spec.get("lambda") is not None:
        return float(spec["lambda"]), False
    source = spec.get("lipschitz", "blocks")
    if source == "blocks":
        L = op.lipschitz
        heuristic = False
    elif source == "estimate":
        L = operators.estimate_lipschitz(op, int(spec.get("samples", 64)), float(spec.get("radius", 10.0)),
                                         int(spec.get("seed", 0)), dimension)
        heuristic = True
    else:
        raise ConfigError(f"schedule.lipschitz: unknown source {source!r}")
    if not L > 0:
        raise ConfigError("schedule: Lipschitz constant is zero; give schedule.lambda explicitly")
    return operators.relative_lipschitz_lambda(L, gen.modulus), heuristic


def build_schedule(spec, method, op, gen, dimension):
    if not isinstance(spec, dict):
        raise ConfigError("field 'schedule' must be an object")
    lam, heuristic = _lambda_for(spec, op, gen, dimension)
    kind = spec.get("kind", "constant")
    if kind == "constant":
        safety = spec.get("safety")
        if method in ("BEG", "EG"):
            sched = solvers.constant_beg_schedule(lam, 1.0 if safety is None else float(safety))
        else:
            sched = solvers.constant_bep_schedule(lam, 0.99 if safety is None else float(safety))
    elif kind == "explicit":
        if "alpha" not in spec:
            raise ConfigError("schedule.alpha is required for explicit schedules")
        sched = solvers.explicit_schedule(spec["alpha"], lam, spec.get("beta"), spec.get("rho"))
    else:
        raise ConfigError(f"schedule.kind: unknown schedule {kind!r}")
    if heuristic:
        sched = solvers.StepSchedule(sched.alpha, sched.beta, sched.lam, sched.rho, True, sched.description)
    return sched


def _init_point(spec, dimension):
    if spec is None or spec == "zeros":
        return np.zeros(dimension)
    if spec == "ones":
        return np.ones(dimension)
    arr = np.array(spec, dtype=float)
    if arr.shape != (dimension,):
        raise ConfigError(f"init must have length {dimension}")
    return arr


def _checks(value):
    if value is None or value == "all":
        return diagnostics.ALL_CHECKS
    if value == "none":
        return ()
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    unknown = set(value) - set(diagnostics.ALL_CHECKS)
    if unknown:
        raise ConfigError(f"checks: unknown diagnostics {sorted(unknown)}")
    return tuple(value)


class Experiment:
    """A config resolved into problem, generator, operator and schedule."""

    def __init__(self, cfg):
        self.cfg = cfg
        method_key = str(_field(cfg, "method", "beg")).lower()
        if method_key not in METHOD_NAMES:
            raise ConfigError(f"method: unknown method {method_key!r}")
        self.method_key = method_key
        self.method = METHOD_NAMES[method_key]
        self.problem = build_problem(_field(cfg, "problem", required=True), cfg.get("_base", "."))
        d = self.problem.dimension
        self.op = operators.saddle_operator(self.problem)
        gen_spec = _field(cfg, "generator")
        if self.method in ("EG", "OGDA") and gen_spec and gen_spec.get("kind", "euclidean") != "euclidean":
            raise ConfigError("generator: reference methods only support the euclidean generator")
        self.gen = build_generator(gen_spec, d)
        self.schedule = build_schedule(_field(cfg, "schedule", {"kind": "constant"}), self.method, self.op,
                                       self.gen, d)
        self.init = _init_point(_field(cfg, "init"), d)
        self.max_iters = int(_field(cfg, "max_iters", 100))
        tol = _field(cfg, "tol")
        self.stop = solvers.StoppingRule(None if tol is None else float(tol))
        self.stride = int(_field(cfg, "stride", 1))

    def validate(self, horizon=None):
        method = "BEG" if self.method in ("BEG", "EG") else "BEP"
        horizon = max(self.max_iters - 1, 0) if horizon is None else horizon
        return solvers.validate_schedule(method, self.schedule, horizon)

    def run(self):
        if self.method in ("BEG", "BEP"):
            return solvers.run(self.method, self.gen, self.op, self.schedule, self.init, self.max_iters,
                               self.stop, saddle=self.problem.saddle_point, stride=self.stride)
        self.validate().raise_if_invalid()
        return solvers.run_reference(self.method, self.op, self.schedule.alpha(0), self.init, self.max_iters)


def _fmt(x):
    return "" if x is None else diagnostics.fmt(x)


def write_trace_csv(path, trace, gaps):
    gap_by_k = {g.k: g for g in gaps}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.records:
            g = gap_by_k.get(r.k - 1) if r.k > 0 else None
            w.writerow([
                r.k,
                _fmt(r.alpha),
                _fmt(r.beta),
                _fmt(r.resid_norm),
                _fmt(g.value_error if g else None),
                _fmt(g.bound_rhs if g else None),
                _fmt(r.dist_to_saddle),
                _fmt(float(np.count_nonzero(r.primal == 0.0)) / r.primal.size),
            ])


def _vec(v):
    return None if v is None else [float(x) for x in v]


def write_trace_json(path, trace):
    doc = {
        "method": trace.method,
        "metadata": trace.metadata,
        "records": [
            {"k": r.k, "primal": _vec(r.primal), "dual": _vec(r.dual), "midpoint": _vec(r.midpoint),
             "average": _vec(r.average), "weight_sum": r.weight_sum, "alpha": r.alpha, "beta": r.beta,
             "resid_norm": r.resid_norm, "op_calls": r.op_calls, "residuals": r.residuals}
            for r in trace.records
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _series_summary(gaps):
    if not gaps:
        return None
    errs = [g.value_error for g in gaps]
    scaled = [g.value_error * g.s_k for g in gaps]
    return {
        "first": errs[0],
        "last": errs[-1],
        "max": max(errs),
        "max_scaled": max(scaled),
        "last_scaled": scaled[-1],
        "all_within_bound": all(g.passed for g in gaps),
    }


def run_experiment(cfg, out_dir=None, checks=None):
    """Run one experiment and write ``trace.csv``, ``diagnostics.csv``, ``summary.json``.

    Returns the exit status.
    """
    start = time.perf_counter()
    exp = Experiment(cfg)
    checks = _checks(checks if checks is not None else cfg.get("checks", "all"))
    out = Path(out_dir if out_dir is not None else cfg.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)

    trace = exp.run()
    reports, gaps = [], []
    if exp.problem.saddle is not None:
        active = checks if exp.method in ("BEG", "BEP") else tuple(c for c in checks if c == "gap")
        if active:
            reports, gaps = diagnostics.run_diagnostics(exp.problem, exp.gen, exp.op, trace, active)
        if len(trace) > 1 and not gaps:
            gaps = diagnostics.gap_bound_series(exp.problem, trace, exp.gen, exp.method)
    elif checks:
        log.warning("no saddle oracle: diagnostics skipped")

    write_trace_csv(out / "trace.csv", trace, gaps)
    diagnostics.write_reports_csv(out / "diagnostics.csv", reports)
    if cfg.get("write_vectors", True):
        write_trace_json(out / "trace.json", trace)
    failed = [r for r in reports if not r.passed]
    summary = {
        "method": exp.method_key,
        "generator": exp.gen.name,
        "iterations": trace.final().k,
        "final_residual": trace.final().resid_norm,
        "lambda": exp.schedule.lam,
        "heuristic_schedule": exp.schedule.heuristic,
        "alpha_minus_one": trace.metadata.get("alpha_minus_one"),
        "op_calls": trace.metadata.get("op_calls"),
        "value_error_series_summary": _series_summary(gaps),
        "checks": list(checks),
        "n_inequalities": len(reports),
        "n_failed": len(failed),
        "all_inequalities_pass": not failed,
        "wall_time": time.perf_counter() - start if cfg.get("record_wall_time", True) else None,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for r in failed[:10]:
        log.warning("diagnostic failed: %s at k=%d (residual %.3e)", r.name, r.k, r.residual)
    log.info("%s: %d iterations, final residual %.3e, %d/%d checks passed", exp.method_key,
             summary["iterations"], summary["final_residual"], len(reports) - len(failed), len(reports))
    return EXIT_FAILED if failed else EXIT_OK


def _solve_one(args):
    path, out_dir, checks, quiet = args
    _setup_logging(quiet)
    try:
        cfg = load_config(path)
        return run_experiment(cfg, out_dir, checks)
    except (BregsaddleError, ValueError) as exc:
        log.error("%s: %s", path, exc)
        return EXIT_ERROR


def compare_traces(ta, tb):
    """Per-record maximum coordinate difference of the primal iterates."""
    if ta.primals().shape[1:] != tb.primals().shape[1:]:
        raise InvalidArgument("traces have different dimensions")
    n = min(len(ta), len(tb))
    return [float(np.max(np.abs(ta.records[i].primal - tb.records[i].primal))) for i in range(n)]


def cmd_solve(ns):
    paths = ns.configs
    jobs = []
    for p in paths:
        out = ns.out_dir
        if out is not None and len(paths) > 1:
            out = str(Path(out) / Path(p).stem)
        jobs.append((p, out, ns.check, ns.quiet))
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            codes = list(pool.map(_solve_one, jobs))
    else:
        codes = [_solve_one(j) for j in jobs]
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_FAILED if EXIT_FAILED in codes else EXIT_OK


def cmd_compare(ns):
    ea = Experiment(load_config(ns.a))
    eb = Experiment(load_config(ns.b))
    if ea.problem.dimension != eb.problem.dimension:
        raise InvalidArgument(f"dimension mismatch: {ea.problem.dimension} vs {eb.problem.dimension}")
    diffs = compare_traces(ea.run(), eb.run())
    worst = max(diffs) if diffs else 0.0
    first_bad = next((i for i, d in enumerate(diffs) if d > ns.tol), None)
    judged = frozenset((ea.method_key, eb.method_key)) in EQUIVALENT
    result = {
        "methods": [ea.method_key, eb.method_key],
        "iterations": len(diffs) - 1,
        "max_divergence": worst,
        "first_k_above_tol": first_bad,
        "tolerance": ns.tol,
        "judged": judged,
        "pass": (first_bad is None) if judged else None,
    }
    print(json.dumps(result, indent=2))
    if judged and first_bad is not None:
        return EXIT_FAILED
    return EXIT_OK


def cmd_validate(ns):
    exp = Experiment(load_config(ns.config))
    rep = exp.validate(ns.horizon)
    print(json.dumps({"valid": rep.valid, "method": rep.method, "horizon": rep.horizon,
                      "condition": rep.condition, "k": rep.k, "detail": rep.detail,
                      "alpha_minus_one": rep.alpha_minus_one}, indent=2))
    return EXIT_OK if rep.valid else EXIT_FAILED


def _setup_logging(quiet):
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr, force=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="bregsaddle", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run experiments and diagnostics")
    p.add_argument("configs", nargs="+", metavar="config.json")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--check", default=None, help="all, none, or a comma-separated list")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="per-iteration divergence of two runs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-schedule", help="check the step-size conditions")
    p.add_argument("config")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    ns = build_parser().parse_args(argv)
    _setup_logging(ns.quiet)
    try:
        return ns.func(ns)
    except (BregsaddleError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
