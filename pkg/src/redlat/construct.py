"""Construction algorithms for rank-1 lattice generating vectors.

All constructions share one sweep engine.  A state vector q over the N
point indices carries the running product of per-coordinate factors
1 + gamma_j * omega({k xi_j / N}); one step of the sweep isolates the
quantity that depends on the active component,

    T_d(z) = sum_k omega((k b^{w_d} z mod N) / N) * q_d(k),

and evaluates it for every candidate z at once through the
block-circulant matvec.  The greedy component-by-component construction
starts from an empty product and extends it; the coordinate-improving
sweep starts from a full seed vector and swaps one factor per step.

Components beyond the last index with w_d < m have a single candidate
and contribute constant factors, so high padded dimensions cost scalar
work only.
"""

import logging
import time
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import ConfigError, GuardError
from .spaces import (
    GeneratingVector,
    ProductWeights,
    ReductionSchedule,
    SpaceParams,
    clamp_squared_error,
    first_min_index,
    omega_table,
    reduced_search_space,
    sstar,
    vector_to_dict,
    wce_dual_oracle_raw,
    wce_product_raw,
    weights_to_dict,
)
from .spectral import OpCounter, reduced_matvec
from .unitgroup import reorder_decomposition

logger = logging.getLogger(__name__)

# |1 + gamma*omega| below this triggers a from-scratch recomputation of
# the divided state instead of the elementwise division.
DIVIDE_GUARD = 1e-8

NAIVE_MAX_S = 8
NAIVE_MAX_N = 2 ** 10
EXHAUSTIVE_MAX_S = 3
EXHAUSTIVE_MAX_N = 2 ** 7


@dataclass
class ConstructionConfig:
    params: SpaceParams
    schedule: ReductionSchedule
    initial: Union[GeneratingVector, Sequence[int], str, None] = None
    tie_break: str = "first-min"
    record_steps: bool = False
    count_ops: bool = False

    def __post_init__(self):
        if self.params.b != self.schedule.b:
            raise ConfigError("params and schedule disagree on the base b")
        if self.tie_break != "first-min":
            raise ConfigError(f"unsupported tie-break policy {self.tie_break!r}")

    @property
    def s(self) -> int:
        return self.schedule.s


@dataclass
class ConstructionResult:
    vector: GeneratingVector
    squared_error: float
    algorithm: str
    seed_vector: Optional[tuple] = None
    per_step_errors: Optional[list] = None
    op_counter: Optional[OpCounter] = None
    wall_time_ms: float = 0.0

    def to_json_dict(self, params: SpaceParams) -> dict:
        d = vector_to_dict(self.vector, params.alpha)
        d["weights"] = weights_to_dict(params.weights)
        d["algorithm"] = self.algorithm
        d["seed_vector"] = list(self.seed_vector) if self.seed_vector else None
        d["squared_error"] = self.squared_error
        d["wall_time_ms"] = self.wall_time_ms
        d["op_count"] = self.op_counter.mults if self.op_counter else None
        return d


def resolve_seed(config: ConstructionConfig) -> tuple:
    """Seed as reduced residues z_bar (the product form Y_j * z_bar_j).

    Accepts a GeneratingVector on the same schedule, the presets
    "reduced-unit" / None (all z_bar = 1, i.e. the vector of
    multipliers), or a raw component sequence that factors through the
    schedule.  Raw vectors that do not factor are rejected here; only
    the direct search accepts those.
    """
    sched = config.schedule
    m = config.params.m
    b = sched.b
    if config.initial is None or config.initial == "reduced-unit":
        return (1,) * sched.s
    if isinstance(config.initial, GeneratingVector):
        v = config.initial
        if (v.b, v.m, tuple(v.w)) != (b, m, tuple(sched.w)):
            raise ConfigError("initial vector built for different b, m, or schedule")
        return tuple(v.z)
    zbar = eq5_decode(tuple(int(x) for x in config.initial), sched, m)
    if zbar is None:
        raise ConfigError(
            "initial vector is not of the reduced product form Y_j * z_bar_j"
        )
    return zbar


def eq5_decode(raw: Sequence[int], schedule: ReductionSchedule, m: int):
    """Factor raw components as Y_j * z_bar_j mod N, or None if impossible."""
    b = schedule.b
    N = b ** m
    out = []
    for wj, xj in zip(schedule.w, raw):
        xj = int(xj) % N
        if wj >= m:
            if xj != 0:
                return None
            out.append(1)
            continue
        Y = b ** wj
        if xj % Y:
            return None
        zb = xj // Y
        if not (1 <= zb < b ** (m - wj)) or zb % b == 0:
            return None
        out.append(zb)
    return tuple(out)


class _SweepState:
    """Shared q-vector bookkeeping for the fast sweeps."""

    def __init__(self, params: SpaceParams, schedule: ReductionSchedule, counter):
        self.params = params
        self.schedule = schedule
        self.b = params.b
        self.m = params.m
        self.N = params.N
        self.s = schedule.s
        self.gam = params.weights.first(self.s)
        self.sstar = sstar(schedule, params.m)
        self.counter = counter
        self.tab = omega_table(self.N)
        if counter is not None:
            counter.add_mults(2 * self.N)
        self.decomps = {}
        self.recompute_events = 0

    def decomp(self, w: int):
        if w not in self.decomps:
            self.decomps[w] = reorder_decomposition(self.b, self.m, w)
        return self.decomps[w]

    def factor_apply(self, q, eff, gamma, divide):
        out, minabs = kernels.korobov_factor_apply(q, self.tab, int(eff), gamma, divide)
        if self.counter is not None:
            self.counter.add_mults(self.N)
        return out, minabs

    def product(self, effs, gammas, start=1.0):
        effs = np.asarray(effs, dtype=np.int64)
        gammas = np.asarray(gammas, dtype=np.float64)
        q = kernels.korobov_product(self.tab, effs, gammas, start)
        if self.counter is not None:
            self.counter.add_mults(self.N * (len(effs) + 1))
        return q


def _run_sweep(config: ConstructionConfig, greedy: bool, algorithm: str):
    t0 = time.perf_counter()
    params, sched = config.params, config.schedule
    counter = OpCounter() if config.count_ops else None
    st = _SweepState(params, sched, counter)
    b, m, N, s = st.b, st.m, st.N, st.s
    smax = min(s, st.sstar)
    # components past smax have w >= m: a single candidate, constant factor
    tail = 1.0
    for j in range(smax, s):
        tail *= 1.0 + st.gam[j] * st.tab[0]

    if greedy:
        seed = None
        q = np.ones(N)
    else:
        seed = resolve_seed(config)
        effs0 = [(b ** sched.w[j] * seed[j]) % N for j in range(s)]
        q = st.product(effs0[:smax], st.gam[:smax])

    chosen = []
    steps = [] if config.record_steps else None
    for d in range(1, smax + 1):
        wd = sched.w[d - 1]
        g = float(st.gam[d - 1])
        if greedy:
            qd = q
        else:
            qd, minabs = st.factor_apply(q, effs0[d - 1], g, divide=True)
            if minabs < DIVIDE_GUARD:
                st.recompute_events += 1
                logger.info(
                    "near-zero factor (|f|=%.3e) at step %d; recomputing state",
                    minabs,
                    d,
                )
                cur = [(b ** sched.w[j] * chosen[j]) % N for j in range(d - 1)]
                cur += [effs0[j] for j in range(d, smax)]
                qd = st.product(cur, [st.gam[j] for j in range(smax) if j != d - 1])
        T = reduced_matvec(st.decomp(wd), qd, counter)
        cands = reduced_search_space(b, m, wd)
        zd = int(cands[first_min_index(T)])
        chosen.append(zd)
        q, _ = st.factor_apply(qd, (b ** wd * zd) % N, g, divide=False)
        if steps is not None:
            # running error: greedy carries d factors, the sweep all s
            steps.append(-1.0 + (tail if not greedy else 1.0) * float(np.mean(q)))
    chosen.extend([1] * (s - smax))

    vec = GeneratingVector(b, m, sched.w, tuple(chosen))
    e2 = clamp_squared_error(-1.0 + tail * float(np.mean(q)), algorithm)
    wall = (time.perf_counter() - t0) * 1e3
    return ConstructionResult(
        vector=vec,
        squared_error=e2,
        algorithm=algorithm,
        seed_vector=tuple((b ** sched.w[j] * seed[j]) % N for j in range(s))
        if seed
        else None,
        per_step_errors=steps,
        op_counter=counter,
        wall_time_ms=wall,
    )


def reduced_fast_scs(config: ConstructionConfig) -> ConstructionResult:
    """Coordinate-improving sweep over reduced search spaces (FFT path).

    Requires product weights, alpha = 2, and a seed in the reduced
    product form; the default seed is the vector of multipliers
    (all z_bar_j = 1).
    """
    _require_fast(config)
    return _run_sweep(config, greedy=False, algorithm="rscs")


def reduced_fast_cbc(config: ConstructionConfig) -> ConstructionResult:
    """Greedy component-by-component construction over reduced spaces.

    The state starts from the empty product and is extended one factor
    per step; the unreduced classic is the all-zero schedule.
    """
    _require_fast(config)
    return _run_sweep(config, greedy=True, algorithm="rcbc")


def _require_fast(config: ConstructionConfig):
    if not isinstance(config.params.weights, ProductWeights):
        raise ConfigError("fast constructions require product weights")
    if config.params.alpha != 2.0:
        raise ConfigError("fast constructions require alpha = 2")
    config.params.weights.first(config.s)


def naive_scs(
    config: ConstructionConfig, oracle_H: int = 64
) -> ConstructionResult:
    """Literal per-candidate sweep evaluating the full worst-case error.

    Product weights go through the closed-form product expression,
    general weights through the truncated dual-lattice oracle with bound
    oracle_H.  Arbitrary raw seeds are allowed; components past the last
    reduced index are still visited (their candidate set is {1}).
    """
    t0 = time.perf_counter()
    params, sched = config.params, config.schedule
    s, m, b, N = config.s, params.m, params.b, params.N
    if s > NAIVE_MAX_S or N > NAIVE_MAX_N:
        raise GuardError(
            f"direct search limited to s <= {NAIVE_MAX_S}, N <= {NAIVE_MAX_N}"
        )
    product = isinstance(params.weights, ProductWeights)

    if config.initial is None or isinstance(config.initial, (str, GeneratingVector)):
        seed = resolve_seed(config)
        xi = [(b ** sched.w[j] * seed[j]) % N for j in range(s)]
    else:
        xi = [int(x) % N for x in config.initial]

    def quality(components):
        if product:
            return wce_product_raw(components, params)
        return wce_dual_oracle_raw(components, params, oracle_H)

    seed_components = tuple(xi)
    chosen = []
    for d in range(1, s + 1):
        wd = sched.w[d - 1]
        Y = b ** wd
        cands = reduced_search_space(b, m, wd)
        vals = np.empty(cands.size)
        for i, z in enumerate(cands):
            xi[d - 1] = (Y * int(z)) % N
            vals[i] = quality(xi)
        zd = int(cands[first_min_index(vals)])
        chosen.append(zd)
        xi[d - 1] = (Y * zd) % N
    vec = GeneratingVector(b, m, sched.w, tuple(chosen))
    e2 = quality(xi)
    return ConstructionResult(
        vector=vec,
        squared_error=e2,
        algorithm="scs-direct",
        seed_vector=seed_components,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


def exhaustive_best(params: SpaceParams, schedule: ReductionSchedule):
    """Global minimum of the squared error over the full candidate grid.

    Optimality oracle for tests; guarded to s <= 3, N <= 2^7, product
    weights.
    """
    s, m, b, N = schedule.s, params.m, params.b, params.N
    if s > EXHAUSTIVE_MAX_S or N > EXHAUSTIVE_MAX_N:
        raise GuardError(
            f"exhaustive search limited to s <= {EXHAUSTIVE_MAX_S}, "
            f"N <= {EXHAUSTIVE_MAX_N}"
        )
    if not isinstance(params.weights, ProductWeights):
        raise ConfigError("exhaustive search requires product weights")
    spaces_per_dim = [reduced_search_space(b, m, w) for w in schedule.w]
    best = None
    best_z = None
    for zs in iproduct(*[map(int, sp) for sp in spaces_per_dim]):
        xi = [(b ** w * z) % N for w, z in zip(schedule.w, zs)]
        e2 = wce_product_raw(xi, params)
        if best is None or e2 < best:
            best = e2
            best_z = zs
    vec = GeneratingVector(b, m, schedule.w, best_z)
    return vec, best


@dataclass
class MonotonicityReport:
    seed_error: float
    output_error: float
    passed: bool
    vector: GeneratingVector


def verify_monotonicity(config: ConstructionConfig) -> MonotonicityReport:
    """Check e(output) <= e(seed) + 1e-12 for a reduced-product-form seed.

    A violation is reported, not raised; both errors come from the
    independent evaluator, not the sweep's internal state.
    """
    seed = resolve_seed(config)
    sched = config.schedule
    b, N = sched.b, config.params.N
    seed_eff = [(b ** sched.w[j] * seed[j]) % N for j in range(sched.s)]
    e_seed = wce_product_raw(seed_eff, config.params) ** 0.5
    res = reduced_fast_scs(config)
    e_out = wce_product_raw(res.vector.effective, config.params) ** 0.5
    return MonotonicityReport(
        seed_error=e_seed,
        output_error=e_out,
        passed=e_out <= e_seed + 1e-12,
        vector=res.vector,
    )
