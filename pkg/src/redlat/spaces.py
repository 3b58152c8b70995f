"""Weighted Korobov-space machinery for rank-1 lattice rules.

Conventions
-----------
* The number of points is N = b^m for a prime base b.
* Coordinate weights are either product weights gamma_u = prod_{j in u}
  gamma_j or a general map from non-empty subsets of {1,..,s} to
  positive reals (gamma_emptyset = 1 implicitly).
* A reduction schedule is a non-decreasing list of integers w_j with
  multipliers Y_j = b^{w_j}.  The search space for component j is

      Z(N, w) = {z in {1,..,b^{m-w}-1} : gcd(z, b) = 1}   (w < m)
                {1}                                        (w >= m)

* A generating vector stores the reduced residues z_j; the lattice rule
  itself uses the effective components Y_j * z_j mod N.
* Squared worst-case errors are carried internally; user-facing reports
  take the square root at the boundary.

The closed-form kernel is restricted to smoothness alpha = 2, where the
single-coordinate kernel is omega(x) = 2*pi^2 * (x^2 - x + 1/6).  The
truncated dual-lattice oracle supports any alpha > 1.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations, product as iproduct
from typing import Sequence, Union

import numpy as np
from scipy.special import zeta as _zeta

from . import kernels
from .errors import ConfigError, GuardError, NumericsError, SmoothnessError

logger = logging.getLogger(__name__)

TWO_PI_SQ = 2.0 * math.pi ** 2

# e^2 values this far below zero are clamped; anything worse is a bug.
NEG_CLAMP = 1e-13

# Relative slack when picking the first minimum of a candidate scan.  The
# fast FFT path and the direct path compute mathematically identical
# values through different float orderings; snapping within this band
# keeps the "first minimum" choice identical across both.
TIE_REL_TOL = 1e-9

GENERAL_WEIGHT_MAX_DIM = 20


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


# ---------------------------------------------------------------------------
# Weight models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductWeights:
    """gamma_u = prod_{j in u} gamma_j for a positive sequence (gamma_j)."""

    gammas: tuple

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if any(g <= 0 for g in self.gammas):
            raise ConfigError("product weights must be strictly positive")

    @classmethod
    def geometric(cls, q: float, s: int) -> "ProductWeights":
        return cls(tuple(q ** j for j in range(1, s + 1)))

    @classmethod
    def polynomial(cls, a: float, s: int) -> "ProductWeights":
        return cls(tuple(1.0 / j ** a for j in range(1, s + 1)))

    def first(self, s: int) -> np.ndarray:
        if len(self.gammas) < s:
            raise ConfigError(
                f"weight sequence of length {len(self.gammas)} used in dimension {s}"
            )
        return np.array(self.gammas[:s], dtype=np.float64)


@dataclass(frozen=True)
class GeneralWeights:
    """Explicit gamma_u per non-empty subset u; missing subsets weigh 0."""

    terms: tuple  # of (frozenset, float) pairs

    def __post_init__(self):
        norm = []
        for subset, g in self.terms:
            u = frozenset(int(j) for j in subset)
            if not u or min(u) < 1:
                raise ConfigError("subsets must be non-empty with indices >= 1")
            if max(u) > GENERAL_WEIGHT_MAX_DIM:
                raise ConfigError(
                    f"general weights limited to dimension {GENERAL_WEIGHT_MAX_DIM}"
                )
            if g <= 0:
                raise ConfigError("general weights must be strictly positive")
            norm.append((u, float(g)))
        norm.sort(key=lambda t: (len(t[0]), sorted(t[0])))
        object.__setattr__(self, "terms", tuple(norm))

    @classmethod
    def from_map(cls, mapping) -> "GeneralWeights":
        return cls(tuple(mapping.items()))

    def as_map(self) -> dict:
        return {u: g for u, g in self.terms}

    def gamma(self, u: frozenset) -> float:
        for subset, g in self.terms:
            if subset == u:
                return g
        return 0.0

    def max_index(self) -> int:
        return max((max(u) for u, _ in self.terms), default=0)


WeightModel = Union[ProductWeights, GeneralWeights]


def sobolev_weight_map(weights: WeightModel, c: float) -> WeightModel:
    """Rescale gamma_u by c^{|u|} (product case: each gamma_j by c).

    This realizes the weight substitutions that transfer Korobov-space
    results to root-mean-square and tent-transformed Sobolev-space
    errors (c = 2*pi^2 and c = pi^2 respectively).
    """
    if isinstance(weights, ProductWeights):
        return ProductWeights(tuple(c * g for g in weights.gammas))
    return GeneralWeights(tuple((u, g * c ** len(u)) for u, g in weights.terms))


# ---------------------------------------------------------------------------
# Space parameters, schedules, generating vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceParams:
    """Fixes the function space: base b, exponent m, smoothness, weights."""

    b: int
    m: int
    alpha: float
    weights: WeightModel

    def __post_init__(self):
        if not is_prime(self.b):
            raise ConfigError(f"base b={self.b} must be prime")
        if self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.alpha <= 1:
            raise ConfigError("smoothness alpha must exceed 1")

    @property
    def N(self) -> int:
        return self.b ** self.m


@dataclass(frozen=True)
class ReductionSchedule:
    """Non-decreasing reduction exponents w_j with multipliers Y_j = b^{w_j}."""

    b: int
    w: tuple

    def __post_init__(self):
        w = tuple(int(x) for x in self.w)
        if any(x < 0 for x in w):
            raise ConfigError("reduction exponents must be non-negative")
        if any(w[i] > w[i + 1] for i in range(len(w) - 1)):
            raise ConfigError("reduction exponents must be non-decreasing")
        object.__setattr__(self, "w", w)

    @property
    def s(self) -> int:
        return len(self.w)

    @property
    def Y(self) -> tuple:
        return tuple(self.b ** x for x in self.w)

    @classmethod
    def zeros(cls, b: int, s: int) -> "ReductionSchedule":
        return cls(b, (0,) * s)

    @classmethod
    def log_family(cls, b: int, s: int, c: float) -> "ReductionSchedule":
        """w_j = floor(c * log_b j); the j = 1 entry is always 0."""
        w = tuple(int(math.floor(c * math.log(j) / math.log(b))) for j in range(1, s + 1))
        return cls(b, w)


def reduced_search_space(b: int, m: int, w: int) -> np.ndarray:
    """Ascending candidates Z(N, w); see the module docstring."""
    if m < 1 or w < 0:
        raise ConfigError("need m >= 1 and w >= 0")
    if w >= m:
        return np.array([1], dtype=np.int64)
    z = np.arange(1, b ** (m - w), dtype=np.int64)
    return z[z % b != 0]


def search_space_size(b: int, m: int, w: int) -> int:
    if w >= m:
        return 1
    return b ** (m - w - 1) * (b - 1)


def sstar(schedule: ReductionSchedule, m: int) -> int:
    """Largest index j (1-based) with w_j < m; 0 if there is none."""
    out = 0
    for j, wj in enumerate(schedule.w, start=1):
        if wj < m:
            out = j
    return out


@dataclass(frozen=True)
class GeneratingVector:
    """Reduced residues z_j plus the effective components Y_j z_j mod N."""

    b: int
    m: int
    w: tuple
    z: tuple
    effective: tuple = field(init=False)

    def __post_init__(self):
        w = tuple(int(x) for x in self.w)
        z = tuple(int(x) for x in self.z)
        if len(w) != len(z):
            raise ConfigError("schedule and component lists differ in length")
        N = self.b ** self.m
        for j, (wj, zj) in enumerate(zip(w, z), start=1):
            if wj >= self.m:
                if zj != 1:
                    raise ConfigError(f"component {j}: z must be 1 when w >= m")
            else:
                if not (1 <= zj < self.b ** (self.m - wj)) or zj % self.b == 0:
                    raise ConfigError(
                        f"component {j}: z={zj} outside the reduced search space"
                    )
        eff = tuple((self.b ** wj * zj) % N for wj, zj in zip(w, z))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "effective", eff)

    @property
    def s(self) -> int:
        return len(self.z)

    @classmethod
    def from_reduced(cls, schedule: ReductionSchedule, m: int, z: Sequence[int]):
        return cls(schedule.b, m, schedule.w, tuple(z))


def vector_to_dict(vec: GeneratingVector, alpha: float) -> dict:
    return {
        "b": vec.b,
        "m": vec.m,
        "s": vec.s,
        "alpha": alpha,
        "w": list(vec.w),
        "z": list(vec.z),
        "effective": list(vec.effective),
    }


def vector_from_dict(d: dict) -> GeneratingVector:
    vec = GeneratingVector(int(d["b"]), int(d["m"]), tuple(d["w"]), tuple(d["z"]))
    if "effective" in d and list(vec.effective) != [int(x) for x in d["effective"]]:
        raise ConfigError("stored effective components disagree with b, w, z")
    return vec


def weights_to_dict(weights: WeightModel) -> dict:
    if isinstance(weights, ProductWeights):
        return {"type": "product", "gammas": list(weights.gammas)}
    return {
        "type": "general",
        "terms": [{"subset": sorted(u), "gamma": g} for u, g in weights.terms],
    }


def weights_from_dict(d: dict) -> WeightModel:
    if d["type"] == "product":
        return ProductWeights(tuple(d["gammas"]))
    if d["type"] == "general":
        return GeneralWeights(
            tuple((frozenset(t["subset"]), t["gamma"]) for t in d["terms"])
        )
    raise ConfigError(f"unknown weight type {d['type']!r}")


# ---------------------------------------------------------------------------
# The alpha = 2 kernel
# ---------------------------------------------------------------------------

def omega(x, alpha: float = 2.0):
    """Single-coordinate kernel 2*pi^2*(x^2 - x + 1/6) on [0, 1).

    Only alpha = 2 has this closed form here; other smoothness values
    must go through the dual-lattice oracle.
    """
    if alpha != 2.0:
        raise SmoothnessError("closed-form kernel only available for alpha = 2")
    x = np.asarray(x, dtype=np.float64)
    out = TWO_PI_SQ * (x * x - x + 1.0 / 6.0)
    return float(out) if out.ndim == 0 else out


def omega_at_residue(res, modulus: int):
    """omega(res / modulus) evaluated on the folded residue min(r, M - r).

    Folding before the division makes mirror-symmetric entries bitwise
    identical, which the exact block-structure checks rely on.
    """
    r = np.asarray(res, dtype=np.int64)
    t = np.minimum(r, modulus - r)
    x = t / modulus
    out = TWO_PI_SQ * (x * x - x + 1.0 / 6.0)
    return float(out) if out.ndim == 0 else out


def omega_table(N: int) -> np.ndarray:
    return omega_at_residue(np.arange(N, dtype=np.int64), N)


def tent(x):
    """Tent transform phi(x) = 1 - |1 - 2x|, applied componentwise."""
    x = np.asarray(x, dtype=np.float64)
    out = 1.0 - np.abs(1.0 - 2.0 * x)
    return float(out) if out.ndim == 0 else out


def lattice_points(vec: GeneratingVector, tent_transform: bool = False) -> np.ndarray:
    """The N x s node array x_n = {n * (Y z) / N}, optionally tented."""
    N = vec.b ** vec.m
    n = np.arange(N, dtype=np.int64)[:, None]
    eff = np.array(vec.effective, dtype=np.int64)[None, :]
    pts = ((n * eff) % N) / N
    return tent(pts) if tent_transform else pts


# ---------------------------------------------------------------------------
# Worst-case errors
# ---------------------------------------------------------------------------

def clamp_squared_error(e2: float, context: str) -> float:
    """Clamp rounding-level negative e^2 to 0; larger negatives are bugs."""
    if e2 < 0.0:
        if e2 < -NEG_CLAMP:
            raise NumericsError(f"{context}: squared error {e2} below -{NEG_CLAMP}")
        logger.debug("%s: clamped tiny negative squared error %.3e", context, e2)
        return 0.0
    return float(e2)


def wce_product_raw(xi: Sequence[int], params: SpaceParams) -> float:
    """Squared worst-case error of arbitrary residue components xi.

    Product weights and alpha = 2 only; cost O(N * s).  Components that
    are 0 mod N contribute a constant factor and are folded into a
    scalar, so padded high dimensions are cheap.
    """
    if not isinstance(params.weights, ProductWeights):
        raise ConfigError("wce_product needs product weights; use the dual oracle")
    if params.alpha != 2.0:
        raise SmoothnessError("wce_product requires alpha = 2")
    N = params.N
    s = len(xi)
    gam = params.weights.first(s)
    tab = omega_table(N)
    xi = [int(x) % N for x in xi]
    active = [(x, g) for x, g in zip(xi, gam) if x != 0]
    tail = 1.0
    for x, g in zip(xi, gam):
        if x == 0:
            tail *= 1.0 + g * tab[0]
    if active:
        effs = np.array([x for x, _ in active], dtype=np.int64)
        gs = np.array([g for _, g in active], dtype=np.float64)
        q = kernels.korobov_product(tab, effs, gs, 1.0)
        mean = float(np.mean(q))
    else:
        mean = 1.0
    return clamp_squared_error(-1.0 + tail * mean, "wce_product")


def wce_product(vec: GeneratingVector, params: SpaceParams) -> float:
    if (vec.b, vec.m) != (params.b, params.m):
        raise ConfigError("vector and space parameters disagree on b, m")
    return wce_product_raw(vec.effective, params)


def _rho_sum_multiples(step: int, alpha: float, H: int) -> float:
    # 2 * sum_{k=1}^{H // step} (k*step)^(-alpha)
    kmax = H // step
    if kmax <= 0:
        return 0.0
    k = np.arange(1, kmax + 1, dtype=np.float64)
    return 2.0 * float(np.sum((k * step) ** (-alpha)))


def _dual_subset_sum(zu: Sequence[int], N: int, alpha: float, H: int) -> float:
    """Truncated sum of rho_alpha over {h : h . zu = 0 mod N, 0 < |h_j| <= H}.

    The last coordinate is solved as a congruence, so the loop runs over
    the (t-1)-dimensional head grid only.
    """
    t = len(zu)
    if t == 1:
        g = math.gcd(zu[0], N)
        return _rho_sum_multiples(N // g, alpha, H)
    if (2 * H) ** (t - 1) > 5e6:
        raise GuardError("dual oracle truncation too large for this dimension")
    grid = [h for h in range(-H, H + 1) if h != 0]
    zt = zu[-1]
    g = math.gcd(zt, N)
    Ng = N // g
    inv = pow((zt // g) % Ng, -1, Ng) if Ng > 1 else 0
    total = 0.0
    for head in iproduct(grid, repeat=t - 1):
        r = (-sum(h * z for h, z in zip(head, zu[:-1]))) % N
        if r % g:
            continue
        h0 = (inv * (r // g)) % Ng if Ng > 1 else 0
        rho_head = 1.0
        for h in head:
            rho_head *= abs(h) ** (-alpha)
        acc = 0.0
        h = h0 - ((h0 + H) // Ng) * Ng
        while h <= H:
            if h != 0:
                acc += abs(h) ** (-alpha)
            h += Ng
        total += rho_head * acc
    return total


def wce_dual_oracle_raw(xi: Sequence[int], params: SpaceParams, H: int) -> float:
    """Truncated dual-lattice squared error for arbitrary weights.

    Sums gamma_u * sum over h_u in ([-H,H] \\ {0})^{|u|} with
    h_u . xi_u = 0 (mod N) of prod |h_j|^(-alpha).  Converges to the
    squared worst-case error monotonically from below as H grows.
    """
    s = len(xi)
    if s > 4:
        raise GuardError("dual oracle limited to s <= 4")
    N = params.N
    xi = [int(x) % N for x in xi]
    total = 0.0
    if isinstance(params.weights, ProductWeights):
        gam = params.weights.first(s)
        for size in range(1, s + 1):
            for u in combinations(range(s), size):
                gamma_u = float(np.prod(gam[list(u)]))
                total += gamma_u * _dual_subset_sum([xi[j] for j in u], N, params.alpha, H)
    else:
        for u, gamma_u in params.weights.terms:
            idx = sorted(u)
            if max(idx) > s:
                continue
            total += gamma_u * _dual_subset_sum([xi[j - 1] for j in idx], N, params.alpha, H)
    return total


def wce_dual_oracle(vec: GeneratingVector, params: SpaceParams, H: int) -> float:
    return wce_dual_oracle_raw(vec.effective, params, H)


# ---------------------------------------------------------------------------
# Error bounds for the constructions
# ---------------------------------------------------------------------------

def two_zeta(x: float) -> float:
    return 2.0 * float(_zeta(x))


def _check_lambda(alpha: float, lam: float):
    if not (1.0 / alpha < lam <= 1.0):
        raise ConfigError(f"lambda must lie in (1/alpha, 1], got {lam}")


def reduced_bound_inner(
    weights: WeightModel, schedule: ReductionSchedule, m: int, lam: float, kconst: float
) -> float:
    """sum_d sum_{d in u} gamma_u^lam * 2 * kconst^{|u|} / b^{max(0, m - w_d)}.

    For product weights the subset sum factorizes as
    gamma_d^lam * kconst * prod_{j != d} (1 + gamma_j^lam * kconst).
    """
    b = schedule.b
    s = schedule.s
    denom = np.array([float(b) ** max(0, m - wd) for wd in schedule.w])
    if isinstance(weights, ProductWeights):
        glam = weights.first(s) ** lam
        factors = 1.0 + glam * kconst
        full = float(np.prod(factors))
        inner = 2.0 * glam * kconst * (full / factors)
        return float(np.sum(inner / denom))
    total = 0.0
    for u, gamma_u in weights.terms:
        idx = sorted(u)
        if max(idx) > s:
            continue
        coeff = gamma_u ** lam * kconst ** len(idx)
        total += 2.0 * coeff * sum(1.0 / denom[d - 1] for d in idx)
    return total


def scs_error_bound(
    params: SpaceParams, schedule: ReductionSchedule, lam: float
) -> float:
    """Upper bound on the squared worst-case error of the constructions.

    Evaluates ( sum_d sum_{d in u} gamma_u^lam * 2 (2 zeta(alpha lam))^{|u|}
    / b^{max(0, m - w_d)} )^{1/lam}.
    """
    _check_lambda(params.alpha, lam)
    k = two_zeta(params.alpha * lam)
    inner = reduced_bound_inner(params.weights, schedule, params.m, lam, k)
    return inner ** (1.0 / lam)


def corollary_constant(
    params: SpaceParams,
    schedule: ReductionSchedule,
    delta: float,
    mode: str = "product",
) -> float:
    """Constant C with e_{N,s} <= C * N^(-alpha/2 + delta) for constructed vectors.

    mode="general" evaluates the subset-sum form; mode="product" the
    factorized product form (weights assumed non-increasing there).
    """
    alpha = params.alpha
    if not (0.0 < delta <= (alpha - 1.0) / 2.0):
        raise ConfigError(f"delta must lie in (0, (alpha-1)/2], got {delta}")
    lam = 1.0 / (alpha - 2.0 * delta)
    expo = alpha / 2.0 - delta
    k = two_zeta(alpha * lam)
    b = schedule.b
    s = schedule.s
    Y = np.array([float(b) ** wd for wd in schedule.w])
    if mode == "general":
        if isinstance(params.weights, ProductWeights):
            glam = params.weights.first(s) ** lam
            factors = 1.0 + glam * k
            full = float(np.prod(factors))
            inner = 2.0 * float(np.sum(glam * k * (full / factors) * Y))
        else:
            inner = 0.0
            for u, gamma_u in params.weights.terms:
                idx = sorted(u)
                if max(idx) > s:
                    continue
                inner += 2.0 * gamma_u ** lam * k ** len(idx) * sum(Y[d - 1] for d in idx)
        return inner ** expo
    if mode == "product":
        if not isinstance(params.weights, ProductWeights):
            raise ConfigError("product mode needs product weights")
        glam = params.weights.first(s) ** lam
        factors = 1.0 + glam * k
        lead = float(np.sum(glam * Y)) * 2.0 * k
        prod = float(np.prod(factors[: s - 1])) if s > 1 else 1.0
        return (lead * prod) ** expo
    raise ConfigError(f"unknown corollary mode {mode!r}")


def first_min_index(values: np.ndarray, rel_tol: float = TIE_REL_TOL) -> int:
    """Index of the first value within a small band of the minimum.

    Mathematically tied candidates (mirror pairs, or degenerate scans
    where every candidate ties) reach the minimum only up to float
    noise; the band makes "first minimum" deterministic and identical
    between the FFT path and direct evaluation.
    """
    values = np.asarray(values, dtype=np.float64)
    vmin = float(values.min())
    scale = max(1.0, float(np.max(np.abs(values))))
    return int(np.argmax(values <= vmin + rel_tol * scale))
