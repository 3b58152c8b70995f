"""FFT engine and circulant matrix-vector products for the fast constructions.

Transforms go through numpy's pocketfft, which handles arbitrary lengths
(the circulant cores have sizes like 3^{r-1} that are far from powers of
two).  Tests check every fast product against a dense oracle that never
touches this module's transform.
"""

import math
from dataclasses import dataclass, field
from threading import Lock

import numpy as np

from .errors import NumericsError, RedlatError
from .unitgroup import BlockDecomposition, CirculantBlock, ConstantBlock


@dataclass
class OpCounter:
    """Rough scalar-operation tally for complexity assertions.

    FFTs of length L are charged 5 * L * max(1, ceil(log2 L))
    multiplications, elementwise passes their length; additions are
    tracked separately (folds and tilings are pure additions).
    """

    mults: int = 0
    adds: int = 0

    def add_mults(self, k: int):
        self.mults += int(k)

    def add_adds(self, k: int):
        self.adds += int(k)

    def charge_transform(self, L: int):
        self.mults += 5 * L * max(1, math.ceil(math.log2(max(L, 2))))


def forward_transform(x) -> np.ndarray:
    """Discrete Fourier transform, any length >= 1."""
    return np.fft.fft(np.asarray(x))


def inverse_transform(X) -> np.ndarray:
    return np.fft.ifft(np.asarray(X))


class CirculantOperator:
    """Circulant matrix defined by its first row, applied via FFT.

    The first column c (and hence the whole matrix, C[i, j] =
    c[(i - j) mod n]) follows from the first row by index reversal.
    Applying the operator to e_0 returns the first column.
    """

    def __init__(self, first_row):
        row = np.asarray(first_row, dtype=np.float64)
        if row.ndim != 1 or row.size < 1:
            raise RedlatError("first row must be a 1-d sequence")
        self.n = row.size
        self.first_row = row
        col = np.empty_like(row)
        col[0] = row[0]
        if self.n > 1:
            col[1:] = row[:0:-1]
        self.first_col = col
        self._rspec = np.fft.rfft(col)

    @property
    def spectrum(self) -> np.ndarray:
        """Forward transform of the defining first row."""
        return np.fft.fft(self.first_row)

    def matvec(self, v, counter: OpCounter = None) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.size != self.n:
            raise RedlatError(f"length mismatch: operator {self.n}, vector {v.size}")
        if self.n == 1:
            out = self.first_col * v
        else:
            out = np.fft.irfft(self._rspec * np.fft.rfft(v), n=self.n)
        if counter is not None:
            counter.charge_transform(self.n)
            counter.charge_transform(self.n)
            counter.add_mults(4 * self.n)
        return out


def circulant_matvec(op: CirculantOperator, v, counter: OpCounter = None) -> np.ndarray:
    return op.matvec(v, counter)


_op_cache_lock = Lock()


def _block_operator(blk: CirculantBlock, counter: OpCounter = None) -> CirculantOperator:
    # Per-decomposition cache; cores are shared across all SCS/CBC steps
    # with the same effective modulus within a construction session.
    if blk._operator is None:
        with _op_cache_lock:
            if blk._operator is None:
                blk._operator = CirculantOperator(blk.first_row)
                if counter is not None:
                    counter.charge_transform(blk.core)
    return blk._operator


def reduced_matvec(
    decomp: BlockDecomposition, q, counter: OpCounter = None
) -> np.ndarray:
    """Omega * q through the block structure; output in ascending-z order.

    q is taken in natural k-order.  Each circulant group pre-sums its
    replicated column segments, applies one FFT-sized core product, and
    tiles the result down the row pattern; constant groups reduce to a
    scaled segment sum.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.size != decomp.n_cols:
        raise RedlatError(
            f"length mismatch: expected {decomp.n_cols} entries, got {q.size}"
        )
    R = decomp.n_rows
    T_block = np.zeros(R, dtype=np.float64)
    for blk in decomp.blocks:
        seg = q[blk.cols]
        if isinstance(blk, ConstantBlock):
            T_block += blk.value * float(seg.sum())
            if counter is not None:
                counter.add_mults(1)
                counter.add_adds(seg.size + R)
            continue
        folded = seg.reshape(blk.h_copies, blk.core).sum(axis=0)
        if counter is not None:
            counter.add_adds(seg.size)
        core_out = _block_operator(blk, counter).matvec(folded, counter)
        T_block += np.tile(core_out, R // blk.core)
        if counter is not None:
            counter.add_adds(R)
    # row_rank[p] is the block-row index of the p-th smallest z
    return T_block[decomp.row_rank]
