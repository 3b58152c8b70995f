"""Hot inner-loop kernels: numba-compiled with pure-numpy fallbacks.

The numba path is selected by default whenever numba imports cleanly.
Setting the environment variable ``REDLAT_NO_NUMBA`` to a truthy value
forces the pure-numpy implementations.  Both variants of every kernel
are importable under the ``*_np`` / ``*_nb`` names so that tests and
``benchmarks/backend_bench.py`` can compare them directly.

Polynomials over GF(b) are encoded as base-b digit rows (lowest degree
first) or, equivalently, as the integer sum(c_i * b**i).
"""

import os

import numpy as np


def _numba_disabled() -> bool:
    return os.environ.get("REDLAT_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


HAVE_NUMBA = False
if not _numba_disabled():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Rank-1 lattice kernels (indices k*eff mod N, kernel values from a table)
# ---------------------------------------------------------------------------

def korobov_product_np(tab, effs, gammas, start):
    """q[k] = start * prod_j (1 + gammas[j] * tab[(k*effs[j]) % N])."""
    N = tab.shape[0]
    k = np.arange(N, dtype=np.int64)
    q = np.full(N, start, dtype=np.float64)
    for j in range(effs.shape[0]):
        q *= 1.0 + gammas[j] * tab[(k * effs[j]) % N]
    return q


def korobov_factor_apply_np(q, tab, eff, gamma, divide):
    """Multiply (or divide) q by the factor vector of one coordinate.

    Returns (new_q, min_abs_factor); the minimum magnitude lets callers
    detect near-zero divisions (the returned vector is then discarded,
    so a zero factor only produces ignored infinities).
    """
    N = tab.shape[0]
    k = np.arange(N, dtype=np.int64)
    f = 1.0 + gamma * tab[(k * eff) % N]
    minabs = float(np.min(np.abs(f)))
    if divide:
        with np.errstate(divide="ignore", invalid="ignore"):
            return q / f, minabs
    return q * f, minabs


def korobov_matvec_np(tab, eff, q):
    """sum_k tab[(k*eff) % N] * q[k] (direct evaluation, test scale)."""
    N = tab.shape[0]
    k = np.arange(N, dtype=np.int64)
    return float(np.dot(tab[(k * eff) % N], q))


# ---------------------------------------------------------------------------
# GF(b)[x] mod x^m kernels
# ---------------------------------------------------------------------------

def base_digit_table(b, m):
    """(b^m, m) uint8 table of base-b digits, lowest significance first."""
    N = b ** m
    n = np.arange(N, dtype=np.int64)
    out = np.empty((N, m), dtype=np.uint8)
    for i in range(m):
        out[:, i] = n % b
        n = n // b
    return out


def poly_mul_deg_np(g_digits, base_digits, b):
    """Degree of (n * g) mod x^m for every n; -1 marks the zero product."""
    N, m = base_digits.shape
    acc = np.zeros((N, m), dtype=np.int64)
    for j in range(m):
        c = int(g_digits[j])
        if c:
            acc[:, j:] += c * base_digits[:, : m - j].astype(np.int64)
    acc %= b
    nz = acc != 0
    any_nz = nz.any(axis=1)
    deg = m - 1 - np.argmax(nz[:, ::-1], axis=1)
    return np.where(any_nz, deg, -1).astype(np.int64)


def poly_mul_int_np(g_digits, base_digits, b):
    """Integer encoding of (n * g) mod x^m for every n."""
    N, m = base_digits.shape
    acc = np.zeros((N, m), dtype=np.int64)
    for j in range(m):
        c = int(g_digits[j])
        if c:
            acc[:, j:] += c * base_digits[:, : m - j].astype(np.int64)
    acc %= b
    pow_b = np.int64(b) ** np.arange(m, dtype=np.int64)
    return acc @ pow_b


def poly_scan_np(qd, cand_digits, base_digits, phi_by_deg, b):
    """T[c] = sum_n phi_by_deg[deg(n*g_c)+1] * qd[n] for each candidate."""
    C = cand_digits.shape[0]
    out = np.empty(C, dtype=np.float64)
    for c in range(C):
        deg = poly_mul_deg_np(cand_digits[c], base_digits, b)
        out[c] = float(np.dot(phi_by_deg[deg + 1], qd))
    return out


def poly_factor_apply_np(q, g_digits, base_digits, phi_by_deg, gamma, b, divide):
    """Walsh-space analogue of korobov_factor_apply for one coordinate."""
    deg = poly_mul_deg_np(g_digits, base_digits, b)
    f = 1.0 + gamma * phi_by_deg[deg + 1]
    minabs = float(np.min(np.abs(f)))
    if divide:
        with np.errstate(divide="ignore", invalid="ignore"):
            return q / f, minabs
    return q * f, minabs


def walsh_product_np(g_digit_rows, gammas, base_digits, phi_by_deg, b, start):
    """q[n] = start * prod_j (1 + gammas[j] * phi(deg(n*g_j)))."""
    N = base_digits.shape[0]
    q = np.full(N, start, dtype=np.float64)
    for j in range(g_digit_rows.shape[0]):
        deg = poly_mul_deg_np(g_digit_rows[j], base_digits, b)
        q *= 1.0 + gammas[j] * phi_by_deg[deg + 1]
    return q


if HAVE_NUMBA:

    @njit(cache=True)
    def korobov_product_nb(tab, effs, gammas, start):
        N = tab.shape[0]
        q = np.full(N, start, dtype=np.float64)
        for j in range(effs.shape[0]):
            e = effs[j]
            g = gammas[j]
            for k in range(N):
                q[k] *= 1.0 + g * tab[(k * e) % N]
        return q

    @njit(cache=True)
    def korobov_factor_apply_nb(q, tab, eff, gamma, divide):
        N = tab.shape[0]
        out = np.empty(N, dtype=np.float64)
        minabs = np.inf
        for k in range(N):
            f = 1.0 + gamma * tab[(k * eff) % N]
            a = abs(f)
            if a < minabs:
                minabs = a
            if divide:
                out[k] = q[k] / f if f != 0.0 else np.inf
            else:
                out[k] = q[k] * f
        return out, minabs

    @njit(cache=True)
    def korobov_matvec_nb(tab, eff, q):
        N = tab.shape[0]
        acc = 0.0
        for k in range(N):
            acc += tab[(k * eff) % N] * q[k]
        return acc

    @njit(cache=True)
    def _prod_deg_one(n_row, g_digits, b, m):
        # Degree of the truncated product, scanning from the top digit down.
        for t in range(m - 1, -1, -1):
            ssum = 0
            for i in range(t + 1):
                ssum += n_row[i] * g_digits[t - i]
            if ssum % b != 0:
                return t
        return -1

    @njit(cache=True)
    def poly_mul_deg_nb(g_digits, base_digits, b):
        N, m = base_digits.shape
        out = np.empty(N, dtype=np.int64)
        for n in range(N):
            out[n] = _prod_deg_one(base_digits[n], g_digits, b, m)
        return out

    @njit(cache=True)
    def poly_mul_int_nb(g_digits, base_digits, b):
        N, m = base_digits.shape
        out = np.zeros(N, dtype=np.int64)
        for n in range(N):
            v = 0
            p = 1
            for t in range(m):
                ssum = 0
                for i in range(t + 1):
                    ssum += base_digits[n, i] * g_digits[t - i]
                v += (ssum % b) * p
                p *= b
            out[n] = v
        return out

    @njit(cache=True)
    def poly_scan_nb(qd, cand_digits, base_digits, phi_by_deg, b):
        C = cand_digits.shape[0]
        N, m = base_digits.shape
        out = np.empty(C, dtype=np.float64)
        for c in range(C):
            acc = 0.0
            for n in range(N):
                deg = _prod_deg_one(base_digits[n], cand_digits[c], b, m)
                acc += phi_by_deg[deg + 1] * qd[n]
            out[c] = acc
        return out

    @njit(cache=True)
    def poly_factor_apply_nb(q, g_digits, base_digits, phi_by_deg, gamma, b, divide):
        N, m = base_digits.shape
        out = np.empty(N, dtype=np.float64)
        minabs = np.inf
        for n in range(N):
            deg = _prod_deg_one(base_digits[n], g_digits, b, m)
            f = 1.0 + gamma * phi_by_deg[deg + 1]
            a = abs(f)
            if a < minabs:
                minabs = a
            if divide:
                out[n] = q[n] / f if f != 0.0 else np.inf
            else:
                out[n] = q[n] * f
        return out, minabs

    @njit(cache=True)
    def walsh_product_nb(g_digit_rows, gammas, base_digits, phi_by_deg, b, start):
        N, m = base_digits.shape
        q = np.full(N, start, dtype=np.float64)
        for j in range(g_digit_rows.shape[0]):
            g = gammas[j]
            for n in range(N):
                deg = _prod_deg_one(base_digits[n], g_digit_rows[j], b, m)
                q[n] *= 1.0 + g * phi_by_deg[deg + 1]
        return q

    korobov_product = korobov_product_nb
    korobov_factor_apply = korobov_factor_apply_nb
    korobov_matvec = korobov_matvec_nb
    poly_mul_deg = poly_mul_deg_nb
    poly_mul_int = poly_mul_int_nb
    poly_scan = poly_scan_nb
    poly_factor_apply = poly_factor_apply_nb
    walsh_product = walsh_product_nb
else:
    korobov_product = korobov_product_np
    korobov_factor_apply = korobov_factor_apply_np
    korobov_matvec = korobov_matvec_np
    poly_mul_deg = poly_mul_deg_np
    poly_mul_int = poly_mul_int_np
    poly_scan = poly_scan_np
    poly_factor_apply = poly_factor_apply_np
    walsh_product = walsh_product_np


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op on the numpy path)."""
    tab = np.array([0.5, -0.5])
    effs = np.array([1], dtype=np.int64)
    gammas = np.array([0.5])
    korobov_product(tab, effs, gammas, 1.0)
    korobov_factor_apply(np.ones(2), tab, 1, 0.5, True)
    korobov_matvec(tab, 1, np.ones(2))
    base = base_digit_table(2, 2)
    phi = np.array([2.0, -1.0, 0.5])
    g = np.array([1, 0], dtype=np.uint8)
    poly_mul_deg(g, base, 2)
    poly_mul_int(g, base, 2)
    poly_scan(np.ones(4), g[None, :], base, phi, 2)
    poly_factor_apply(np.ones(4), g, base, phi, 0.5, 2, False)
    walsh_product(g[None, :], gammas, base, phi, 2, 1.0)
