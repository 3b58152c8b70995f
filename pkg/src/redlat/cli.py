"""Command-line front end: constructions, error evaluation, experiments.

Subcommands
-----------
construct    build one generating vector, emit JSON with provenance
error        re-evaluate the worst-case error of a stored vector
convergence  error-vs-N sweeps over an m-range (CSV/JSON)
timing       construction wall times, median over repeats (CSV/JSON)
error-table  multi-seed sweep statistics with greedy baselines (CSV/JSON)

Weight specs: ``geometric:q``, ``polynomial:a``, ``list:g1,g2,...`` or a
JSON file; schedule specs: ``log:c``, ``list:w1,w2,...`` or a JSON file.
A JSON config file mirroring the flags can be passed via --config;
explicit flags win.  Randomness comes from numpy's PCG64 stream seeded
by --rng-seed, so seed draws are reproducible bit for bit.

Exit codes: 0 success, 2 configuration error, 1 internal error.
"""

import argparse
import csv
import io
import json
import statistics
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .construct import (
    ConstructionConfig,
    naive_scs,
    reduced_fast_cbc,
    reduced_fast_scs,
)
from .errors import ConfigError, RedlatError
from .polylattice import (
    PolyGF,
    PolyGeneratingVector,
    poly_vector_from_dict,
    reduced_scs_poly,
    wce_walsh_product,
)
from .spaces import (
    GeneratingVector,
    ProductWeights,
    ReductionSchedule,
    SpaceParams,
    is_prime,
    reduced_search_space,
    sstar,
    vector_from_dict,
    wce_product,
    weights_from_dict,
    weights_to_dict,
)

ALGORITHMS = ("cbc", "rcbc", "scs", "rscs", "scs-poly", "rscs-poly")
FLOAT_FMT = "%.15g"
MAX_SCS_RERUNS = 10


@dataclass
class ExperimentConfig:
    kind: str
    b: int = 2
    m: Optional[int] = None
    m_range: Optional[tuple] = None
    s: int = 1
    alpha: float = 2.0
    weights: str = "geometric:0.5"
    schedule: str = "log:0"
    algos: List[str] = field(default_factory=list)
    seeds: int = 1
    rng_seed: int = 0
    seed_vector: Optional[str] = None
    repeats: int = 3
    out: Optional[str] = None
    fmt: str = "csv"

    def validate(self):
        if not is_prime(self.b):
            raise ConfigError(f"--base: {self.b} is not prime")
        if self.m is None and self.m_range is None:
            raise ConfigError("--m or --m-range is required")
        if self.s < 1:
            raise ConfigError("--dim must be >= 1")
        if self.alpha <= 1:
            raise ConfigError("--alpha must exceed 1")
        for a in self.algos:
            if a not in ALGORITHMS:
                raise ConfigError(
                    f"--algo: unknown algorithm {a!r}; choose from {ALGORITHMS}"
                )
        if self.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        if self.repeats < 1:
            raise ConfigError("--repeats must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"--format: unknown format {self.fmt!r}")

    def m_values(self):
        if self.m_range is not None:
            lo, hi = self.m_range
            return list(range(lo, hi + 1))
        return [self.m]


def parse_weights(spec, s: int):
    if isinstance(spec, dict):
        w = weights_from_dict(spec)
    elif spec.startswith("geometric:"):
        w = ProductWeights.geometric(float(spec.split(":", 1)[1]), s)
    elif spec.startswith("polynomial:"):
        w = ProductWeights.polynomial(float(spec.split(":", 1)[1]), s)
    elif spec.startswith("list:"):
        w = ProductWeights(tuple(float(x) for x in spec.split(":", 1)[1].split(",")))
    else:
        try:
            with open(spec) as fh:
                w = weights_from_dict(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"--weights: cannot read {spec!r}: {exc}")
    if isinstance(w, ProductWeights) and len(w.gammas) < s:
        raise ConfigError(f"--weights: {len(w.gammas)} weights for dimension {s}")
    return w


def parse_schedule(spec: str, b: int, s: int) -> ReductionSchedule:
    if spec.startswith("log:"):
        return ReductionSchedule.log_family(b, s, float(spec.split(":", 1)[1]))
    if spec.startswith("list:"):
        w = tuple(int(x) for x in spec.split(":", 1)[1].split(","))
        if len(w) != s:
            raise ConfigError(f"--schedule: {len(w)} entries for dimension {s}")
        return ReductionSchedule(b, w)
    try:
        with open(spec) as fh:
            return ReductionSchedule(b, tuple(json.load(fh)))
    except OSError as exc:
        raise ConfigError(f"--schedule: cannot read {spec!r}: {exc}")


def _effective_schedule(algo: str, cfg: ExperimentConfig, b: int, s: int):
    # the unreduced variants ignore the schedule: all w_j = 0
    if algo in ("cbc", "scs", "scs-poly"):
        return ReductionSchedule.zeros(b, s)
    return parse_schedule(cfg.schedule, b, s)


def _construct(algo, params, sched, initial=None):
    if algo in ("cbc", "rcbc"):
        return reduced_fast_cbc(ConstructionConfig(params, sched))
    if algo in ("scs", "rscs"):
        return reduced_fast_scs(ConstructionConfig(params, sched, initial=initial))
    if algo in ("scs-poly", "rscs-poly"):
        return reduced_scs_poly(params, sched, initial=initial)
    raise ConfigError(f"--algo: unknown algorithm {algo!r}")


def _independent_error(result, params) -> float:
    if isinstance(result.vector, PolyGeneratingVector):
        return wce_walsh_product(result.vector, params)
    return wce_product(result.vector, params)


def _write_rows(cfg: ExperimentConfig, header, rows) -> str:
    if cfg.fmt == "json":
        payload = [dict(zip(header, r)) for r in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow(
                [FLOAT_FMT % v if isinstance(v, float) else v for v in r]
            )
        text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def run_convergence(cfg: ExperimentConfig):
    rows = []
    for m in cfg.m_values():
        params = SpaceParams(cfg.b, m, cfg.alpha, parse_weights(cfg.weights, cfg.s))
        for algo in cfg.algos:
            sched = _effective_schedule(algo, cfg, cfg.b, cfg.s)
            res = _construct(algo, params, sched)
            e2 = _independent_error(res, params)
            rows.append((algo, cfg.b ** m, e2 ** 0.5, res.wall_time_ms))
    return _write_rows(cfg, ("algorithm", "N", "e", "wall_time_ms"), rows)


def run_timing(cfg: ExperimentConfig):
    rows = []
    for m in cfg.m_values():
        params = SpaceParams(cfg.b, m, cfg.alpha, parse_weights(cfg.weights, cfg.s))
        for algo in cfg.algos:
            sched = _effective_schedule(algo, cfg, cfg.b, cfg.s)
            _construct(algo, params, sched)  # warm caches and JIT
            times = []
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                _construct(algo, params, sched)
                times.append(time.perf_counter() - t0)
            rows.append(
                (algo, m, cfg.s, sstar(sched, m), statistics.median(times))
            )
    return _write_rows(cfg, ("algorithm", "m", "s", "s_star", "wall_time_s"), rows)


def _draw_seed(rng, sched: ReductionSchedule, m: int) -> GeneratingVector:
    z = []
    for w in sched.w:
        cands = reduced_search_space(sched.b, m, w)
        z.append(int(cands[rng.integers(cands.size)]))
    return GeneratingVector(sched.b, m, sched.w, tuple(z))


def _iterate_scs(params, sched, seed_vec: GeneratingVector):
    """Re-run the sweep on its own output until the vector is a fixed point."""
    current = seed_vec
    for _ in range(MAX_SCS_RERUNS):
        res = reduced_fast_scs(ConstructionConfig(params, sched, initial=current))
        if res.vector.z == current.z:
            return res, True
        current = res.vector
    return res, False


def run_error_table(cfg: ExperimentConfig):
    rows = []
    for m in cfg.m_values():
        weights = parse_weights(cfg.weights, cfg.s)
        params = SpaceParams(cfg.b, m, cfg.alpha, weights)
        sched = parse_schedule(cfg.schedule, cfg.b, cfg.s)
        zero = ReductionSchedule.zeros(cfg.b, cfg.s)
        cbc = reduced_fast_cbc(ConstructionConfig(params, zero))
        rcbc = reduced_fast_cbc(ConstructionConfig(params, sched))
        rng = np.random.default_rng(np.random.PCG64(cfg.rng_seed))
        if cfg.seed_vector == "cbc":
            seeds = [_cbc_as_seed(cbc.vector, sched, m)]
        else:
            seeds = [_draw_seed(rng, sched, m) for _ in range(cfg.seeds)]
        best_single = np.inf
        best_multi = np.inf
        unconverged = 0
        for sv in seeds:
            single = reduced_fast_scs(ConstructionConfig(params, sched, initial=sv))
            best_single = min(best_single, _independent_error(single, params))
            multi, ok = _iterate_scs(params, sched, sv)
            if not ok:
                unconverged += 1
            best_multi = min(best_multi, _independent_error(multi, params))
        if unconverged:
            print(
                f"warning: {unconverged} seed(s) hit the rerun cap "
                f"({MAX_SCS_RERUNS}) without reaching a fixed point",
                file=sys.stderr,
            )
        table = [
            ("cbc", _independent_error(cbc, params)),
            ("rcbc", _independent_error(rcbc, params)),
            ("rscs-best", best_single),
            ("rscs-iterated", best_multi),
        ]
        for name, e2 in table:
            rows.append((cfg.weights, m, name, 0.5 * np.log10(e2)))
    return _write_rows(cfg, ("weights", "m", "algorithm", "log10_e"), rows)


def _cbc_as_seed(
    vec: GeneratingVector, sched: ReductionSchedule, m: int
) -> GeneratingVector:
    """Re-express an unreduced vector on the reduced schedule if possible."""
    from .construct import eq5_decode

    zbar = eq5_decode(vec.effective, sched, m)
    if zbar is None:
        raise ConfigError("--seed-vector cbc: output does not factor per schedule")
    return GeneratingVector(sched.b, m, sched.w, zbar)


def _load_seed_vector(spec, b, m, sched, poly: bool):
    if spec is None or spec in ("reduced-unit", "ones"):
        return None
    with open(spec) as fh:
        d = json.load(fh)
    if poly:
        return poly_vector_from_dict(d)
    return vector_from_dict(d)


def run_construct(cfg: ExperimentConfig):
    if len(cfg.algos) != 1:
        raise ConfigError("construct needs exactly one --algo")
    algo = cfg.algos[0]
    m = cfg.m_values()[0]
    params = SpaceParams(cfg.b, m, cfg.alpha, parse_weights(cfg.weights, cfg.s))
    sched = _effective_schedule(algo, cfg, cfg.b, cfg.s)
    poly = algo.endswith("poly")
    initial = _load_seed_vector(cfg.seed_vector, cfg.b, m, sched, poly)
    res = _construct(algo, params, sched, initial=initial)
    payload = res.to_json_dict(params)
    payload["error"] = _independent_error(res, params) ** 0.5
    payload["provenance"] = {
        "version": __version__,
        "rng_seed": cfg.rng_seed,
        "config": {
            "algo": algo,
            "b": cfg.b,
            "m": m,
            "dim": cfg.s,
            "alpha": cfg.alpha,
            "weights": cfg.weights if isinstance(cfg.weights, str) else "inline",
            "schedule": cfg.schedule,
        },
    }
    text = json.dumps(payload, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def run_error(path: str, out: Optional[str]):
    with open(path) as fh:
        d = json.load(fh)
    weights = weights_from_dict(d["weights"])
    alpha = float(d.get("alpha", 2.0))
    if isinstance(d.get("g"), list):
        vec = poly_vector_from_dict(d)
        params = SpaceParams(vec.b, vec.m, alpha, weights)
        e2 = wce_walsh_product(vec, params)
    else:
        vec = vector_from_dict(d)
        params = SpaceParams(vec.b, vec.m, alpha, weights)
        e2 = wce_product(vec, params)
    payload = {"squared_error": e2, "error": e2 ** 0.5}
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file mirroring the experiment config")
    p.add_argument("--base", type=int, help="prime base b (default 2)")
    p.add_argument("--m", type=int, help="exponent m, N = b^m")
    p.add_argument("--m-range", help="inclusive range lo:hi of exponents")
    p.add_argument("--dim", type=int, help="dimension s (default 1)")
    p.add_argument("--alpha", type=float, help="smoothness (default 2)")
    p.add_argument("--weights", help="geometric:q | polynomial:a | list:... | file")
    p.add_argument("--schedule", help="log:c | list:... | file")
    p.add_argument("--algo", help="comma list of " + "|".join(ALGORITHMS))
    p.add_argument("--seed-vector", help="file or preset for the sweep seed")
    p.add_argument("--seeds", type=int, help="number of random seed vectors q")
    p.add_argument("--rng-seed", type=int, help="seed of the PCG64 stream")
    p.add_argument("--repeats", type=int, help="timing repeats (median reported)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"))


def _merge_config(args, kind: str) -> ExperimentConfig:
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {args.config!r}: {exc}")
        unknown = set(base) - {
            "b", "m", "m_range", "s", "alpha", "weights", "schedule",
            "algos", "seeds", "rng_seed", "seed_vector", "repeats", "out", "fmt",
        }
        if unknown:
            raise ConfigError(f"--config: unknown fields {sorted(unknown)}")
    cfg = ExperimentConfig(kind=kind, **base)
    if args.base is not None:
        cfg.b = args.base
    if args.m is not None:
        cfg.m = args.m
    if args.m_range is not None:
        try:
            lo, hi = args.m_range.split(":")
            cfg.m_range = (int(lo), int(hi))
        except ValueError:
            raise ConfigError("--m-range expects lo:hi")
    elif isinstance(cfg.m_range, list):
        cfg.m_range = tuple(cfg.m_range)
    if args.dim is not None:
        cfg.s = args.dim
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.weights is not None:
        cfg.weights = args.weights
    if args.schedule is not None:
        cfg.schedule = args.schedule
    if args.algo is not None:
        cfg.algos = [a for a in args.algo.split(",") if a]
    if args.seeds is not None:
        cfg.seeds = args.seeds
    if args.rng_seed is not None:
        cfg.rng_seed = args.rng_seed
    if args.seed_vector is not None:
        cfg.seed_vector = args.seed_vector
    if args.repeats is not None:
        cfg.repeats = args.repeats
    if args.out is not None:
        cfg.out = args.out
    if args.fmt is not None:
        cfg.fmt = args.fmt
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="redlat",
        description="Construct rank-1 (polynomial) lattice rules and "
        "evaluate worst-case integration errors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("construct", "convergence", "timing", "error-table"):
        _add_common(sub.add_parser(name))
    perr = sub.add_parser("error")
    perr.add_argument("--vector", required=True, help="JSON vector file")
    perr.add_argument("--out")

    args = parser.parse_args(argv)
    try:
        if args.command == "error":
            run_error(args.vector, args.out)
            return 0
        cfg = _merge_config(args, args.command)
        if args.command == "construct":
            run_construct(cfg)
        elif args.command == "convergence":
            if not cfg.algos and cfg.algos != []:
                raise ConfigError("--algo is required")
            run_convergence(cfg)
        elif args.command == "timing":
            run_timing(cfg)
        elif args.command == "error-table":
            run_error_table(cfg)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RedlatError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
