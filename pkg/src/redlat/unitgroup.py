"""Unit-group structure behind the reduced evaluation matrix.

The matrix driving one construction step is

    Omega[z, k] = omega((k * b^w * z mod b^m) / b^m),
    z in Z(N, w) = U(b^{m-w}),  k in {0,..,N-1},

whose entries only depend on k*z modulo b^{m-w}.  Ordering the rows by a
generator of the unit group and grouping the columns by the power of b
dividing k mod b^{m-w} turns Omega into replicated circulant cores

    M_r[i, j] = omega((g^{i-j} mod b^r) / b^r)

of size phi(b^r)/2 (the half-group size; the kernel symmetry
omega(x) = omega(1-x) folds z and -z together), plus constant column
blocks for the k that are 0 (and, for b = 2, N/2) modulo b^{m-w}.
For b = 2 the role of the generator is played by 5, which generates the
index-2 cyclic subgroup of U(2^r).

The dense assembler exists for tests only; production code goes through
BlockDecomposition and the FFT matvec in the spectral module.
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Callable, List, Optional, Union

import numpy as np

from .errors import ConfigError, GuardError
from .spaces import omega_at_residue, reduced_search_space

KernelFn = Callable[[np.ndarray, int], np.ndarray]

DENSE_GUARD = 2 ** 14


def phi_prime_power(b: int, r: int) -> int:
    """Euler totient of b^r for prime b."""
    if r < 1:
        raise ConfigError("need r >= 1")
    return b ** (r - 1) * (b - 1)


def _prime_factors(n: int) -> list:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def primitive_root(b: int, r: int) -> int:
    """Smallest generator of U(b^r) for odd prime b; the fixed 5 for b = 2.

    For b = 2 the unit group is not cyclic once r >= 3; 5 generates its
    cyclic half, which is exactly what the half-group orderings need.
    """
    if r < 1:
        raise ConfigError("need r >= 1")
    if b == 2:
        return 5
    mod = b ** r
    order = phi_prime_power(b, r)
    checks = [order // p for p in _prime_factors(order)]
    g = 2
    while True:
        if g % b != 0 and all(pow(g, c, mod) != 1 for c in checks):
            return g
        g += 1


@dataclass(frozen=True)
class HalfGroupOrdering:
    """Powers of g and of g^{-1} modulo b^r, phi(b^r)/2 of each."""

    b: int
    r: int
    g: int
    forward: tuple
    inverse: tuple


def half_group(g: int, b: int, r: int) -> HalfGroupOrdering:
    mod = b ** r
    if gcd(g % mod if mod > 1 else 1, mod) != 1:
        raise ConfigError(f"g={g} is not a unit modulo {b}^{r}")
    half = phi_prime_power(b, r) // 2
    if half == 0:
        # b = 2, r = 1: phi(2) = 1; the singleton {1} stands in.
        return HalfGroupOrdering(b, r, g, (1,), (1,))
    ginv = pow(g, -1, mod)
    fwd, inv = [], []
    x, y = 1, 1
    for _ in range(half):
        fwd.append(x)
        inv.append(y)
        x = (x * g) % mod
        y = (y * ginv) % mod
    return HalfGroupOrdering(b, r, g, tuple(fwd), tuple(inv))


def assemble_reduced_matrix(
    b: int, m: int, w: int, kernel: Optional[KernelFn] = None
) -> np.ndarray:
    """Dense Omega matrix, rows over Z(N, w) ascending, columns k = 0..N-1.

    Reference implementation for tests; guarded to N <= 2^14.
    """
    N = b ** m
    if N > DENSE_GUARD:
        raise GuardError(f"dense assembly limited to N <= {DENSE_GUARD}")
    ker = kernel or omega_at_residue
    zs = reduced_search_space(b, m, w)
    k = np.arange(N, dtype=np.int64)
    bw = b ** w
    rows = [ker((k * (bw * int(z))) % N, N) for z in zs]
    return np.vstack(rows)


@dataclass
class CirculantBlock:
    """One column group realized by a replicated circulant core.

    The core M has size `core` and first row `first_row`;  the group
    lays out `h_copies` horizontal copies of M's column pattern and the
    full matrix stacks the [M; M] pattern `v_reps` times vertically.
    `cols` lists the original k-columns in copy-major order.
    """

    r: int
    core: int
    first_row: np.ndarray
    v_reps: int
    h_copies: int
    cols: np.ndarray
    _operator: object = field(default=None, repr=False)

    def layout_row(self, i: int, n_rows: int) -> np.ndarray:
        p = i % self.core
        # row p of a circulant with first row rho is rho rolled right by p
        return np.tile(np.roll(self.first_row, p), self.h_copies)


@dataclass
class ConstantBlock:
    """Column group whose entries are a single kernel value."""

    value: float
    cols: np.ndarray

    def layout_row(self, i: int, n_rows: int) -> np.ndarray:
        return np.full(self.cols.size, self.value)


Block = Union[CirculantBlock, ConstantBlock]


@dataclass
class BlockDecomposition:
    """Permutations plus block descriptors reproducing Omega exactly.

    Row i of the reordered matrix corresponds to z = row_order[i]; the
    columns are listed by the concatenated `cols` arrays of `blocks`
    (equivalently col_order).  Entry-for-entry the reordered layout
    equals the naive matrix under these permutations, with values from
    the very same kernel evaluations.
    """

    b: int
    m: int
    w: int
    g: int
    row_order: np.ndarray
    blocks: List[Block]

    def __post_init__(self):
        self.n_rows = self.row_order.size
        self.n_cols = self.b ** self.m
        self.col_order = np.concatenate([blk.cols for blk in self.blocks])
        # positions of block rows in ascending-z order
        self.row_rank = np.argsort(self.row_order, kind="stable")

    def layout_row(self, i: int) -> np.ndarray:
        """Row i of the reordered block layout, assembled from descriptors."""
        return np.concatenate([blk.layout_row(i, self.n_rows) for blk in self.blocks])

    def dump(self) -> str:
        """Text description of the block shapes (golden-file friendly)."""
        lines = [
            f"Omega b={self.b} m={self.m} w={self.w} g={self.g} "
            f"rows={self.n_rows} cols={self.n_cols}"
        ]
        for blk in self.blocks:
            if isinstance(blk, CirculantBlock):
                lines.append(
                    f"  circulant r={blk.r} core={blk.core} "
                    f"v_reps={blk.v_reps} h_copies={blk.h_copies} "
                    f"cols={blk.cols.size}"
                )
            else:
                lines.append(f"  constant value={blk.value:.12g} cols={blk.cols.size}")
        return "\n".join(lines)


def _half_power_lists(g: int, mod: int, half: int):
    ginv = pow(g, -1, mod)
    fwd = np.empty(half, dtype=np.int64)
    inv = np.empty(half, dtype=np.int64)
    x, y = 1, 1
    for i in range(half):
        fwd[i] = x
        inv[i] = y
        x = (x * g) % mod
        y = (y * ginv) % mod
    return fwd, inv


def reorder_decomposition(
    b: int, m: int, w: int, kernel: Optional[KernelFn] = None
) -> BlockDecomposition:
    """Group-ordered block-circulant form of the reduced matrix (w < m)."""
    if w >= m:
        raise GuardError("reorder_decomposition requires w < m")
    ker = kernel or omega_at_residue
    n = m - w
    N = b ** m
    bn = b ** n
    bw = b ** w

    if b == 2:
        g = 5
        if n >= 3:
            half_n = 2 ** (n - 2)
            fwd, _ = _half_power_lists(g, bn, half_n)
            row_order = np.concatenate([fwd, (-fwd) % bn])
        elif n == 2:
            row_order = np.array([1, 3], dtype=np.int64)
        else:
            row_order = np.array([1], dtype=np.int64)
        r_min = 2
    else:
        g = primitive_root(b, n)
        half_n = phi_prime_power(b, n) // 2
        fwd, _ = _half_power_lists(g, bn, half_n)
        row_order = np.concatenate([fwd, (-fwd) % bn])
        r_min = 1

    blocks: List[Block] = []
    for r in range(n, r_min - 1, -1):
        mod_r = b ** r
        core = phi_prime_power(b, r) // 2
        _, inv_half = _half_power_lists(g, mod_r, core)
        first_row = np.asarray(ker(inv_half, mod_r), dtype=np.float64)
        shift = b ** (n - r)
        cols = np.empty(2 * bw * core, dtype=np.int64)
        pos = 0
        for t in range(bw):
            base = t * bn
            for sigma in (1, -1):
                cols[pos : pos + core] = base + shift * ((sigma * inv_half) % mod_r)
                pos += core
        blocks.append(
            CirculantBlock(
                r=r,
                core=core,
                first_row=first_row,
                v_reps=b ** (n - r),
                h_copies=2 * bw,
                cols=cols,
            )
        )

    t_idx = np.arange(bw, dtype=np.int64)
    if b == 2:
        half_val = float(ker(np.array([N // 2]), N)[0])
        blocks.append(ConstantBlock(value=half_val, cols=t_idx * bn + bn // 2))
    zero_val = float(ker(np.array([0]), N)[0])
    blocks.append(ConstantBlock(value=zero_val, cols=t_idx * bn))

    return BlockDecomposition(b=b, m=m, w=w, g=g, row_order=row_order, blocks=blocks)


def degenerate_decomposition(
    b: int, m: int, w: int, kernel: Optional[KernelFn] = None
) -> BlockDecomposition:
    """The w >= m case: a single row of the constant kernel value at 0."""
    if w < m:
        raise ConfigError("degenerate form is for w >= m; use reorder_decomposition")
    ker = kernel or omega_at_residue
    N = b ** m
    zero_val = float(ker(np.array([0]), N)[0])
    blocks: List[Block] = [
        ConstantBlock(value=zero_val, cols=np.arange(N, dtype=np.int64))
    ]
    return BlockDecomposition(
        b=b, m=m, w=w, g=1, row_order=np.array([1], dtype=np.int64), blocks=blocks
    )
