"""Polynomial lattice rules over GF(b)[x] modulo x^m and their Walsh-space errors.

Mirrors the rank-1 lattice machinery with integers replaced by
polynomials: the node set of a generating vector g is

    x_n = (nu(n g_1 / x^m), ..., nu(n g_s / x^m)),   deg(n) < m,

where nu maps the coefficient of x^i to the base-b digit of weight
b^{i-m}.  The single-coordinate kernel is the weighted Walsh series

    phi(x) = sum_{h >= 1} b^{-alpha floor(log_b h)} wal_h(x),

whose value depends only on the position of the first nonzero base-b
digit of x; the closed form below is validated against the truncated
series in the test suite (the truncated series is the contract, the
closed form the optimization).

Polynomials are encoded two ways: as PolyGF (coefficient tuples, lowest
degree first, no trailing zeros) at the API surface, and as base-b
integers sum(c_i b^i) inside the kernels.
"""

import logging
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, GuardError, SmoothnessError
from .spaces import (
    ProductWeights,
    ReductionSchedule,
    SpaceParams,
    clamp_squared_error,
    first_min_index,
    reduced_bound_inner,
    reduced_search_space,
    sstar,
)
from .spectral import OpCounter

logger = logging.getLogger(__name__)

DIVIDE_GUARD = 1e-8
DIRECT_M_GUARD = 12
ORACLE_MAX_S = 3


# ---------------------------------------------------------------------------
# GF(b)[x] arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyGF:
    """Polynomial over GF(b); coeffs lowest degree first, canonical form."""

    b: int
    coeffs: tuple

    def __post_init__(self):
        c = [int(x) % self.b for x in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def deg(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def is_zero(self) -> bool:
        return not self.coeffs

    def to_index(self) -> int:
        v = 0
        for c in reversed(self.coeffs):
            v = v * self.b + c
        return v

    @classmethod
    def from_index(cls, b: int, e: int) -> "PolyGF":
        c = []
        while e:
            c.append(e % b)
            e //= b
        return cls(b, tuple(c))

    @classmethod
    def one(cls, b: int) -> "PolyGF":
        return cls(b, (1,))

    @classmethod
    def x_power(cls, b: int, k: int) -> "PolyGF":
        return cls(b, (0,) * k + (1,))


def _same_base(a: PolyGF, c: PolyGF):
    if a.b != c.b:
        raise ConfigError(f"polynomial bases differ: {a.b} vs {c.b}")


def poly_add(a: PolyGF, c: PolyGF) -> PolyGF:
    _same_base(a, c)
    n = max(len(a.coeffs), len(c.coeffs))
    out = [0] * n
    for i, v in enumerate(a.coeffs):
        out[i] += v
    for i, v in enumerate(c.coeffs):
        out[i] += v
    return PolyGF(a.b, tuple(v % a.b for v in out))


def poly_mul_mod_xm(a: PolyGF, c: PolyGF, m: int) -> PolyGF:
    _same_base(a, c)
    out = [0] * m
    for i, va in enumerate(a.coeffs):
        if va == 0 or i >= m:
            continue
        for j, vc in enumerate(c.coeffs):
            if i + j >= m:
                break
            out[i + j] += va * vc
    return PolyGF(a.b, tuple(v % a.b for v in out))


def poly_is_unit_mod_xm(a: PolyGF) -> bool:
    """Invertibility modulo x^m is exactly a nonzero constant term."""
    return bool(a.coeffs) and a.coeffs[0] != 0


def trm(h: int, m: int, b: int) -> PolyGF:
    """Base-b digits of h become coefficients, truncated at degree m."""
    if h < 0:
        raise ConfigError("need h >= 0")
    c = []
    for _ in range(m):
        c.append(h % b)
        h //= b
    return PolyGF(b, tuple(c))


def nu(v: PolyGF, m: int, b: int) -> float:
    """Fractional value of v / x^m: coefficient a_i gets weight b^{i-m}."""
    if v.b != b:
        raise ConfigError("polynomial base mismatch")
    k = 0
    for c in reversed(v.coeffs[:m]):
        k = k * b + c
    return k / b ** m


# ---------------------------------------------------------------------------
# Generating vectors and point sets
# ---------------------------------------------------------------------------

def poly_search_space(b: int, m: int, w: int) -> np.ndarray:
    """Integer encodings of {g : deg g < m-w, nonzero constant term}.

    The encodings coincide with the integer search space (units have a
    nonzero low digit), ascending.
    """
    return reduced_search_space(b, m, w)


@dataclass(frozen=True)
class PolyGeneratingVector:
    """Per-coordinate unit polynomials plus effective x^{w_j} g_j mod x^m."""

    b: int
    m: int
    w: tuple
    g: tuple  # of PolyGF
    effective: tuple = None

    def __post_init__(self):
        w = tuple(int(x) for x in self.w)
        g = tuple(self.g)
        if len(w) != len(g):
            raise ConfigError("schedule and component lists differ in length")
        eff = []
        for j, (wj, gj) in enumerate(zip(w, g), start=1):
            if gj.b != self.b:
                raise ConfigError(f"component {j}: base mismatch")
            if wj >= self.m:
                if gj.to_index() != 1:
                    raise ConfigError(f"component {j}: g must be 1 when w >= m")
            else:
                if gj.deg >= self.m - wj or not poly_is_unit_mod_xm(gj):
                    raise ConfigError(
                        f"component {j}: polynomial outside the reduced search space"
                    )
            eff.append(poly_mul_mod_xm(PolyGF.x_power(self.b, wj), gj, self.m))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "effective", tuple(eff))

    @property
    def s(self) -> int:
        return len(self.g)


def poly_vector_to_dict(vec: PolyGeneratingVector) -> dict:
    return {
        "b": vec.b,
        "m": vec.m,
        "s": vec.s,
        "w": list(vec.w),
        "g": [list(p.coeffs) for p in vec.g],
    }


def poly_vector_from_dict(d: dict) -> PolyGeneratingVector:
    b = int(d["b"])
    return PolyGeneratingVector(
        b, int(d["m"]), tuple(d["w"]), tuple(PolyGF(b, tuple(c)) for c in d["g"])
    )


def plr_points(vec: PolyGeneratingVector) -> np.ndarray:
    """The b^m x s node array of the polynomial lattice rule."""
    b, m = vec.b, vec.m
    N = b ** m
    base = kernels.base_digit_table(b, m)
    cols = []
    for eff in vec.effective:
        u = kernels.poly_mul_int(_digit_row(eff, m), base, b)
        cols.append(u / N)
    return np.stack(cols, axis=1)


def _digit_row(p: PolyGF, m: int) -> np.ndarray:
    row = np.zeros(m, dtype=np.uint8)
    for i, c in enumerate(p.coeffs[:m]):
        row[i] = c
    return row


# ---------------------------------------------------------------------------
# Walsh functions and the single-coordinate kernel
# ---------------------------------------------------------------------------

def mu_b(alpha: float, b: int) -> float:
    """sum_{h>=1} b^{-alpha floor(log_b h)} = b^alpha (b-1) / (b^alpha - b)."""
    if alpha <= 1:
        raise ConfigError("mu_b requires alpha > 1")
    return b ** alpha * (b - 1) / (b ** alpha - b)


def _digits_of_fraction(x: float, b: int, max_digits: int = 60):
    """Finite base-b digit string of x in [0, 1), or None if unrepresentable.

    Takes the smallest p with x * b^p within rounding distance of an
    integer.  The tolerance is a few ulp at the scaled magnitude; any
    wrong p (for an x representable with more digits, up to the b^p <=
    2^42 cap) leaves a remainder of at least b^-42, a factor ~50 above
    the tolerance, so the two cases cannot be confused.
    """
    if not (0.0 <= x < 1.0):
        raise ConfigError("need x in [0, 1)")
    pmax = min(max(1, int(42 / math.log2(b))), max_digits)
    for p in range(0, pmax + 1):
        scaled = x * float(b ** p)  # b^p <= 2^42 is an exact double
        k = round(scaled)
        if abs(scaled - k) <= 4e-15 * max(1.0, scaled) and 0 <= k < b ** p:
            digits = []
            kk = int(k)
            for _ in range(p):
                digits.append(kk % b)
                kk //= b
            digits.reverse()  # most significant fractional digit first
            return digits
    return None


def walsh_wal(h: int, x: float, b: int):
    """The h-th base-b Walsh function at a finitely representable x."""
    if h < 0:
        raise ConfigError("need h >= 0")
    digits = _digits_of_fraction(x, b)
    if digits is None:
        raise ConfigError(f"x={x} has no finite base-{b} expansion at this precision")
    tot = 0
    i = 0
    while h:
        if i < len(digits):
            tot += digits[i] * (h % b)
        h //= b
        i += 1
    return complex(np.exp(2j * np.pi * (tot % b) / b))


def walsh_kernel_by_leading(i0: int, alpha: float, b: int) -> float:
    """Kernel value from the position of the first nonzero digit.

    i0 = 0 encodes x = 0 (value mu_b); otherwise the digit-block sums of
    the Walsh series telescope to a geometric expression in i0 alone.
    """
    if i0 == 0:
        return mu_b(alpha, b)
    t = float(b) ** ((1.0 - alpha) * (i0 - 1))
    return (b - 1) * (1.0 - t) / (1.0 - float(b) ** (1.0 - alpha)) - t


def walsh_kernel(x: float, alpha: float, b: int) -> float:
    """phi(x) = sum_{h>=1} b^{-alpha psi_b(h)} wal_h(x), in closed form."""
    if alpha <= 1:
        raise ConfigError("walsh_kernel requires alpha > 1")
    digits = _digits_of_fraction(x, b)
    if digits is None:
        raise ConfigError(f"x={x} has no finite base-{b} expansion at this precision")
    i0 = 0
    for i, d in enumerate(digits, start=1):
        if d:
            i0 = i
            break
    return walsh_kernel_by_leading(i0, alpha, b)


def walsh_kernel_truncated(x: float, alpha: float, b: int, H: int) -> float:
    """Direct partial sum over h = 1..b^H; the validation oracle.

    The tail beyond b^H is bounded by mu_b(alpha) * b^{-(alpha-1) H}.
    """
    hmax = b ** H
    h = np.arange(1, hmax + 1, dtype=np.int64)
    psi = np.floor(np.log(h) / np.log(b) + 1e-12).astype(np.int64)
    weights = (1.0 * b) ** (-alpha * psi)
    digits = _digits_of_fraction(x, b)
    if digits is None:
        raise ConfigError(f"x={x} not representable in base {b}")
    tot = np.zeros(h.size, dtype=np.int64)
    hh = h.copy()
    i = 0
    while hh.max() > 0:
        if i < len(digits) and digits[i]:
            tot += digits[i] * (hh % b)
        hh //= b
        i += 1
    vals = np.exp(2j * np.pi * (tot % b) / b)
    return float(np.real(np.sum(weights * vals)))


@lru_cache(maxsize=32)
def phi_by_deg_table(b: int, m: int, alpha: float) -> np.ndarray:
    """Kernel value per product degree: index 0 is the zero polynomial
    (x = 0), index d+1 the value for nu-images with deg = d, i.e. first
    nonzero digit at position m - d."""
    out = np.empty(m + 1)
    out[0] = mu_b(alpha, b)
    for d in range(m):
        out[d + 1] = walsh_kernel_by_leading(m - d, alpha, b)
    return out


# ---------------------------------------------------------------------------
# Worst-case errors in the Walsh space
# ---------------------------------------------------------------------------

def wce_walsh_product_raw(
    eff: Sequence[PolyGF], params: SpaceParams, m: Optional[int] = None
) -> float:
    """Squared error from arbitrary effective components (product weights)."""
    if not isinstance(params.weights, ProductWeights):
        raise ConfigError("wce_walsh_product needs product weights")
    if params.alpha != 2.0:
        raise SmoothnessError("closed-form Walsh kernel path requires alpha = 2")
    m = params.m if m is None else m
    b = params.b
    s = len(eff)
    gam = params.weights.first(s)
    phi = phi_by_deg_table(b, m, params.alpha)
    tail = 1.0
    rows = []
    gs = []
    for e, g in zip(eff, gam):
        if e.is_zero():
            tail *= 1.0 + g * phi[0]
        else:
            rows.append(_digit_row(e, m))
            gs.append(g)
    if rows:
        base = kernels.base_digit_table(b, m)
        q = kernels.walsh_product(
            np.stack(rows), np.array(gs), base, phi, b, 1.0
        )
        mean = float(np.mean(q))
    else:
        mean = 1.0
    return clamp_squared_error(-1.0 + tail * mean, "wce_walsh_product")


def wce_walsh_product(vec: PolyGeneratingVector, params: SpaceParams) -> float:
    if (vec.b, vec.m) != (params.b, params.m):
        raise ConfigError("vector and space parameters disagree on b, m")
    return wce_walsh_product_raw(vec.effective, params)


def _gf_neg_int(e: int, b: int) -> int:
    out = 0
    p = 1
    while e:
        out += ((b - e % b) % b) * p
        e //= b
        p *= b
    return out


def _gf_add_int(a: int, c: int, b: int) -> int:
    out = 0
    p = 1
    while a or c:
        out += ((a + c) % b) * p
        a //= b
        c //= b
        p *= b
    return out


def wce_walsh_dual_oracle(
    vec: PolyGeneratingVector, params: SpaceParams, H: int
) -> float:
    """Truncated dual-space sum over h_j in [1, b^H] per active coordinate.

    Membership h_u in the dual set is decided through tr_m and
    polynomial arithmetic; the sum is monotone non-decreasing in H.
    """
    b, m, s = vec.b, vec.m, vec.s
    if s > ORACLE_MAX_S:
        raise GuardError(f"dual oracle limited to s <= {ORACLE_MAX_S}")
    if b ** H > 2 ** 22:
        raise GuardError("dual oracle truncation too large")
    alpha = params.alpha
    N = b ** m
    base = kernels.base_digit_table(b, m)
    hs = np.arange(1, b ** H + 1, dtype=np.int64)
    psi = np.floor(np.log(hs) / np.log(b) + 1e-12)
    rw = (1.0 * b) ** (-alpha * psi)
    buckets = []
    for eff in vec.effective:
        res = kernels.poly_mul_int(_digit_row(eff, m), base, b)
        res_h = res[hs % N]
        bucket = {}
        for r, wgt in zip(res_h.tolist(), rw.tolist()):
            bucket[r] = bucket.get(r, 0.0) + wgt
        buckets.append(bucket)

    if isinstance(params.weights, ProductWeights):
        gam = params.weights.first(s)

        def gamma_u(idx):
            return float(np.prod(gam[list(idx)]))

    else:
        wmap = params.weights.as_map()

        def gamma_u(idx):
            return wmap.get(frozenset(j + 1 for j in idx), 0.0)

    total = 0.0
    for size in range(1, s + 1):
        for u in combinations(range(s), size):
            gu = gamma_u(u)
            if gu == 0.0:
                continue
            if size == 1:
                part = buckets[u[0]].get(0, 0.0)
            elif size == 2:
                bi, bj = buckets[u[0]], buckets[u[1]]
                part = sum(
                    v * bj.get(_gf_neg_int(r, b), 0.0) for r, v in bi.items()
                )
            else:
                bi, bj, bk = (buckets[j] for j in u)
                part = 0.0
                for r1, v1 in bi.items():
                    for r2, v2 in bj.items():
                        r3 = _gf_neg_int(_gf_add_int(r1, r2, b), b)
                        part += v1 * v2 * bk.get(r3, 0.0)
            total += gu * part
    return total


# ---------------------------------------------------------------------------
# Bounds and the construction sweep
# ---------------------------------------------------------------------------

def scs_error_bound_poly(
    params: SpaceParams, schedule: ReductionSchedule, lam: float
) -> float:
    """Walsh-space analogue of the construction bound: 2 zeta(alpha lam)
    is replaced by mu_b(alpha lam) in every subset factor."""
    if not (1.0 / params.alpha < lam <= 1.0):
        raise ConfigError(f"lambda must lie in (1/alpha, 1], got {lam}")
    k = mu_b(params.alpha * lam, params.b)
    inner = reduced_bound_inner(params.weights, schedule, params.m, lam, k)
    return inner ** (1.0 / lam)


@dataclass
class PolyConstructionResult:
    vector: PolyGeneratingVector
    squared_error: float
    algorithm: str
    seed_vector: Optional[tuple] = None
    per_step_errors: Optional[list] = None
    op_counter: Optional[OpCounter] = None
    wall_time_ms: float = 0.0

    def to_json_dict(self, params: SpaceParams) -> dict:
        from .spaces import weights_to_dict

        d = poly_vector_to_dict(self.vector)
        d["alpha"] = params.alpha
        d["weights"] = weights_to_dict(params.weights)
        d["algorithm"] = self.algorithm
        d["seed_vector"] = (
            [list(p.coeffs) for p in self.seed_vector] if self.seed_vector else None
        )
        d["squared_error"] = self.squared_error
        d["wall_time_ms"] = self.wall_time_ms
        d["op_count"] = self.op_counter.mults if self.op_counter else None
        return d


def _resolve_poly_seed(
    initial, b: int, m: int, schedule: ReductionSchedule
) -> tuple:
    """Seed as a tuple of PolyGF with deg < m."""
    if initial is None or initial == "reduced-unit":
        out = []
        for wj in schedule.w:
            out.append(
                PolyGF.x_power(b, wj) if wj < m else PolyGF(b, ())
            )
        return tuple(out)
    if isinstance(initial, PolyGeneratingVector):
        if (initial.b, initial.m, tuple(initial.w)) != (b, m, tuple(schedule.w)):
            raise ConfigError("initial vector built for different b, m, or schedule")
        return tuple(initial.effective)
    out = []
    for p in initial:
        if not isinstance(p, PolyGF) or p.b != b or p.deg >= m:
            raise ConfigError("seed components must be PolyGF with deg < m")
        out.append(p)
    if len(out) != schedule.s:
        raise ConfigError("seed length differs from the schedule")
    return tuple(out)


def reduced_scs_poly(
    params: SpaceParams,
    schedule: ReductionSchedule,
    initial=None,
    record_steps: bool = False,
    count_ops: bool = False,
) -> PolyConstructionResult:
    """Per-step minimization of the Walsh-space error over G(N, w_d).

    The direct scan costs O(b^{2m - w_d}) per step, so m is guarded.
    Candidates are enumerated by ascending integer encoding with
    first-minimum tie-breaking; components past the last reduced index
    are set to 1 (their effective component vanishes).
    """
    t0 = time.perf_counter()
    b, m = params.b, params.m
    if b != schedule.b:
        raise ConfigError("params and schedule disagree on the base b")
    if m > DIRECT_M_GUARD:
        raise GuardError(f"direct polynomial sweep limited to m <= {DIRECT_M_GUARD}")
    if not isinstance(params.weights, ProductWeights):
        raise ConfigError("the default evaluator requires product weights")
    if params.alpha != 2.0:
        raise SmoothnessError("closed-form Walsh kernel path requires alpha = 2")
    s = schedule.s
    N = b ** m
    gam = params.weights.first(s)
    smax = min(s, sstar(schedule, m))
    counter = OpCounter() if count_ops else None

    seed = _resolve_poly_seed(initial, b, m, schedule)
    base = kernels.base_digit_table(b, m)
    phi = phi_by_deg_table(b, m, params.alpha)

    # scalar factors for coordinates whose current component vanishes
    def is_zero_row(row):
        return not row.any()

    seed_rows = [_digit_row(p, m) for p in seed]
    q = np.ones(N)
    tail = 1.0
    for j in range(s):
        if is_zero_row(seed_rows[j]):
            tail *= 1.0 + gam[j] * phi[0]
        else:
            q, _ = kernels.poly_factor_apply(
                q, seed_rows[j], base, phi, float(gam[j]), b, False
            )
            if counter is not None:
                counter.add_mults(N)

    chosen = []
    steps = [] if record_steps else None
    for d in range(1, s + 1):
        wd = schedule.w[d - 1]
        g = float(gam[d - 1])
        seed_row = seed_rows[d - 1]
        seed_zero = is_zero_row(seed_row)
        if d > smax:
            # single candidate 1 with vanishing effective component
            chosen.append(PolyGF.one(b))
            if not seed_zero:
                q, minabs = kernels.poly_factor_apply(
                    q, seed_row, base, phi, g, b, True
                )
                if minabs < DIVIDE_GUARD:
                    q = _poly_recompute(
                        base, phi, gam, seed_rows, chosen, schedule, d, s, m, b
                    )
                tail *= 1.0 + g * phi[0]
            continue
        if seed_zero:
            qd = q
            tail /= 1.0 + g * phi[0]
        else:
            qd, minabs = kernels.poly_factor_apply(q, seed_row, base, phi, g, b, True)
            if minabs < DIVIDE_GUARD:
                logger.info("near-zero Walsh factor at step %d; recomputing state", d)
                qd = _poly_recompute(
                    base, phi, gam, seed_rows, chosen, schedule, d, s, m, b
                )
        cands = poly_search_space(b, m, wd)
        cand_rows = np.zeros((cands.size, m), dtype=np.uint8)
        for i, e in enumerate(cands):
            ee = int(e)
            pos = wd
            while ee and pos < m:
                cand_rows[i, pos] = ee % b
                ee //= b
                pos += 1
        T = kernels.poly_scan(qd, cand_rows, base, phi, b)
        if counter is not None:
            counter.add_mults(cands.size * N)
        idx = first_min_index(T)
        gd = PolyGF.from_index(b, int(cands[idx]))
        chosen.append(gd)
        q, _ = kernels.poly_factor_apply(qd, cand_rows[idx], base, phi, g, b, False)
        if counter is not None:
            counter.add_mults(N)
        if steps is not None:
            steps.append(-1.0 + tail * float(np.mean(q)))

    vec = PolyGeneratingVector(b, m, schedule.w, tuple(chosen))
    e2 = clamp_squared_error(-1.0 + tail * float(np.mean(q)), "rscs-poly")
    return PolyConstructionResult(
        vector=vec,
        squared_error=e2,
        algorithm="rscs-poly",
        seed_vector=seed,
        per_step_errors=steps,
        op_counter=counter,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


def _poly_recompute(base, phi, gam, seed_rows, chosen, schedule, d, s, m, b):
    """Rebuild the divided state from scratch, skipping coordinate d."""
    N = base.shape[0]
    q = np.ones(N)
    for j in range(s):
        if j == d - 1:
            continue
        if j < len(chosen):
            row = _digit_row(
                poly_mul_mod_xm(
                    PolyGF.x_power(b, schedule.w[j]), chosen[j], m
                ),
                m,
            )
        else:
            row = seed_rows[j]
        if row.any():
            q, _ = kernels.poly_factor_apply(q, row, base, phi, float(gam[j]), b, False)
    return q
