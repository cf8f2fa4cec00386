"""JIT inner loops for the O(n^2) kernel summations.

Layout of the hot path, shared by the naive and cell-list strategies:

* kernel weights for one query against a chunk of atoms are produced by a
  fastmath helper (vectorizable; the Gaussian case uses a polynomial exp
  with exact power-of-two scaling, max relative error ~2e-15);
* accumulation runs OUTSIDE fastmath, per query, in a fixed atom order,
  with Neumaier compensation.  Each query is owned by exactly one thread,
  so results are bit-identical for any worker count.

d = 1 gets dedicated kernels (the inner reduction over components defeats
SIMD otherwise); higher d uses the generic path.

Kernel codes: 0 gaussian, 1 epanechnikov, 2 uniform-ball.
"""

import os
import warnings

os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))

import numpy as np
from llvmlite import ir

# stale-TBB advisory from the threading-layer probe; the workqueue layer is fine
warnings.filterwarnings("ignore", message=".*TBB.*")

from numba import njit, prange, types
from numba.extending import intrinsic

from numba import config as _numba_config
from numba import get_num_threads, set_num_threads

MAX_WORKERS = _numba_config.NUMBA_NUM_THREADS

# The env default above reserves headroom so callers may request more workers
# than cores (determinism across worker counts is part of the contract), but
# oversubscription is slow, so the active default is the physical count.
set_num_threads(max(1, min(os.cpu_count() or 1, MAX_WORKERS)))

CODE_GAUSSIAN = 0
CODE_EPANECHNIKOV = 1
CODE_UNIFORM = 2

_KERNEL_CODES = {
    "gaussian": CODE_GAUSSIAN,
    "epanechnikov": CODE_EPANECHNIKOV,
    "uniform-ball": CODE_UNIFORM,
}

_CHUNK = 2048


def kernel_code(kernel_id):
    return _KERNEL_CODES[kernel_id]


class engine_workers:
    """Temporarily pin the number of JIT worker threads (no-op for None)."""

    def __init__(self, workers):
        self.workers = workers
        self._saved = None

    def __enter__(self):
        if self.workers is not None:
            self._saved = get_num_threads()
            set_num_threads(max(1, min(int(self.workers), MAX_WORKERS)))
        return self

    def __exit__(self, *exc):
        if self._saved is not None:
            set_num_threads(self._saved)
        return False


@intrinsic
def _bits_to_f64(typingctx, i):
    # reinterpret an int64 bit pattern as a float64 (no conversion)
    sig = types.float64(types.int64)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.DoubleType())

    return sig, codegen


_LOG2E = 1.4426950408889634074
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10


@njit(fastmath=True, inline="always")
def _fast_exp(t):
    # exp(t) = 2^k * exp(r), |r| <= ln2/2; degree-12 Horner polynomial.
    if t < -708.0:
        return 0.0
    kf = np.rint(t * _LOG2E)
    r = t - kf * _LN2_HI
    r = r - kf * _LN2_LO
    p = 2.08767569878681e-09
    p = p * r + 2.50521083854417e-08
    p = p * r + 2.75573192239859e-07
    p = p * r + 2.75573192239859e-06
    p = p * r + 2.48015873015873e-05
    p = p * r + 1.98412698412698e-04
    p = p * r + 1.38888888888889e-03
    p = p * r + 8.33333333333333e-03
    p = p * r + 4.16666666666667e-02
    p = p * r + 1.66666666666667e-01
    p = p * r + 0.5
    p = p * r + 1.0
    p = p * r + 1.0
    bits = (np.int64(kf) + 1023) << 52
    return p * _bits_to_f64(bits)


@njit(fastmath=True)
def _fill_1d(buf, xq, xa, start, count, code, invh, prefac):
    if code == 0:
        for i in range(count):
            diff = xq - xa[start + i]
            buf[i] = prefac * _fast_exp(-0.5 * diff * diff * invh)
    elif code == 1:
        for i in range(count):
            diff = xq - xa[start + i]
            t = 1.0 - diff * diff * invh
            buf[i] = prefac * t if t > 0.0 else 0.0
    else:
        for i in range(count):
            diff = xq - xa[start + i]
            buf[i] = prefac if diff * diff * invh <= 1.0 else 0.0


@njit(fastmath=True)
def _fill_nd(buf, xq, xa, start, count, code, invh, prefac):
    d = xa.shape[1]
    if code == 0:
        for i in range(count):
            r2 = 0.0
            for c in range(d):
                diff = xq[c] - xa[start + i, c]
                r2 += diff * diff
            buf[i] = prefac * _fast_exp(-0.5 * r2 * invh)
    elif code == 1:
        for i in range(count):
            r2 = 0.0
            for c in range(d):
                diff = xq[c] - xa[start + i, c]
                r2 += diff * diff
            t = 1.0 - r2 * invh
            buf[i] = prefac * t if t > 0.0 else 0.0
    else:
        for i in range(count):
            r2 = 0.0
            for c in range(d):
                diff = xq[c] - xa[start + i, c]
                r2 += diff * diff
            buf[i] = prefac if r2 * invh <= 1.0 else 0.0


@njit(inline="always")
def _neumaier(s, comp, v):
    t = s + v
    if abs(s) >= abs(v):
        comp += (s - t) + v
    else:
        comp += (v - t) + s
    return t, comp


@njit(inline="always")
def _accumulate_den(buf, count, s, comp):
    for i in range(count):
        w = buf[i]
        s, comp = _neumaier(s, comp, w)
    return s, comp


@njit(inline="always")
def _accumulate(buf, g, start, count, s, comp, gsum, gcomp):
    p = g.shape[1]
    if p == 0:
        return _accumulate_den(buf, count, s, comp)
    for i in range(count):
        w = buf[i]
        s, comp = _neumaier(s, comp, w)
        for c in range(p):
            s2, c2 = _neumaier(gsum[c], gcomp[c], g[start + i, c] * w)
            gsum[c] = s2
            gcomp[c] = c2
    return s, comp


@njit(parallel=True, cache=True)
def _naive_1d_den(xq, xa, code, invh, prefac):
    nq = xq.shape[0]
    na = xa.shape[0]
    den = np.empty(nq)
    for k in prange(nq):
        buf = np.empty(_CHUNK)
        s = 0.0
        comp = 0.0
        pos = 0
        while pos < na:
            count = min(_CHUNK, na - pos)
            _fill_1d(buf, xq[k], xa, pos, count, code, invh, prefac)
            s, comp = _accumulate_den(buf, count, s, comp)
            pos += count
        den[k] = s + comp
    return den


@njit(parallel=True, cache=True)
def _naive_1d(xq, xa, g, code, invh, prefac):
    nq = xq.shape[0]
    na = xa.shape[0]
    p = g.shape[1]
    den = np.empty(nq)
    gs = np.empty((nq, p))
    for k in prange(nq):
        buf = np.empty(_CHUNK)
        s = 0.0
        comp = 0.0
        gsum = np.zeros(p)
        gcomp = np.zeros(p)
        pos = 0
        while pos < na:
            count = min(_CHUNK, na - pos)
            _fill_1d(buf, xq[k], xa, pos, count, code, invh, prefac)
            s, comp = _accumulate(buf, g, pos, count, s, comp, gsum, gcomp)
            pos += count
        den[k] = s + comp
        for c in range(p):
            gs[k, c] = gsum[c] + gcomp[c]
    return den, gs


@njit(parallel=True, cache=True)
def _naive_nd(xq, xa, g, code, invh, prefac):
    nq = xq.shape[0]
    na = xa.shape[0]
    p = g.shape[1]
    den = np.empty(nq)
    gs = np.empty((nq, p))
    for k in prange(nq):
        buf = np.empty(_CHUNK)
        s = 0.0
        comp = 0.0
        gsum = np.zeros(p)
        gcomp = np.zeros(p)
        pos = 0
        while pos < na:
            count = min(_CHUNK, na - pos)
            _fill_nd(buf, xq[k], xa, pos, count, code, invh, prefac)
            s, comp = _accumulate(buf, g, pos, count, s, comp, gsum, gcomp)
            pos += count
        den[k] = s + comp
        for c in range(p):
            gs[k, c] = gsum[c] + gcomp[c]
    return den, gs


@njit(parallel=True, cache=True)
def _cells_1d(xq, xa_sorted, g_sorted, starts, counts, ncells, xmin, inv_cell,
              code, invh, prefac):
    nq = xq.shape[0]
    p = g_sorted.shape[1]
    den = np.empty(nq)
    gs = np.empty((nq, p))
    for k in prange(nq):
        buf = np.empty(_CHUNK)
        qcell = np.int64(np.floor((xq[k] - xmin) * inv_cell))
        s = 0.0
        comp = 0.0
        gsum = np.zeros(p)
        gcomp = np.zeros(p)
        for off in range(-1, 2):
            idx = qcell + off
            if idx < 0 or idx >= ncells:
                continue
            start = starts[idx]
            total = counts[idx]
            pos = 0
            while pos < total:
                count = min(_CHUNK, total - pos)
                _fill_1d(buf, xq[k], xa_sorted, start + pos, count, code, invh, prefac)
                s, comp = _accumulate(
                    buf, g_sorted, start + pos, count, s, comp, gsum, gcomp
                )
                pos += count
        den[k] = s + comp
        for c in range(p):
            gs[k, c] = gsum[c] + gcomp[c]
    return den, gs


@njit(parallel=True, cache=True)
def _cells_nd(xq, xa_sorted, g_sorted, starts, counts, dims, strides, xmin,
              inv_cell, offsets, code, invh, prefac):
    nq = xq.shape[0]
    d = xq.shape[1]
    p = g_sorted.shape[1]
    noff = offsets.shape[0]
    den = np.empty(nq)
    gs = np.empty((nq, p))
    for k in prange(nq):
        buf = np.empty(_CHUNK)
        qcell = np.empty(d, dtype=np.int64)
        for c in range(d):
            qcell[c] = np.int64(np.floor((xq[k, c] - xmin[c]) * inv_cell))
        s = 0.0
        comp = 0.0
        gsum = np.zeros(p)
        gcomp = np.zeros(p)
        for o in range(noff):
            ravel = 0
            ok = True
            for c in range(d):
                idx = qcell[c] + offsets[o, c]
                if idx < 0 or idx >= dims[c]:
                    ok = False
                    break
                ravel += idx * strides[c]
            if not ok:
                continue
            start = starts[ravel]
            total = counts[ravel]
            pos = 0
            while pos < total:
                count = min(_CHUNK, total - pos)
                _fill_nd(buf, xq[k], xa_sorted, start + pos, count, code, invh, prefac)
                s, comp = _accumulate(
                    buf, g_sorted, start + pos, count, s, comp, gsum, gcomp
                )
                pos += count
        den[k] = s + comp
        for c in range(p):
            gs[k, c] = gsum[c] + gcomp[c]
    return den, gs


class CellGrid:
    """Uniform grid over one block's coordinates, cell size = scaled support.

    Atoms are stably sorted by raveled cell id; per query, the 3^d neighbor
    cells are visited in a fixed ascending order, so the accumulation order
    ("sorted-cell order") is deterministic.  An atom farther than the scaled
    support from the query can appear in a neighbor cell, but the kernel is
    exactly zero there, so the cell-list sums equal the naive ones up to
    summation-order roundoff.
    """

    def __init__(self, atoms, cell_size):
        atoms = np.ascontiguousarray(atoms, dtype=np.float64)
        self.atoms = atoms
        na, d = atoms.shape
        self.d = d
        self.cell_size = float(cell_size)
        self.xmin = atoms.min(axis=0)
        inv = 1.0 / self.cell_size
        idx = np.floor((atoms - self.xmin) * inv).astype(np.int64)
        self.dims = np.ascontiguousarray(idx.max(axis=0) + 1)
        strides = np.ones(d, dtype=np.int64)
        for c in range(d - 2, -1, -1):
            strides[c] = strides[c + 1] * self.dims[c + 1]
        self.strides = strides
        ravel = idx @ strides
        self.order = np.argsort(ravel, kind="stable")
        sorted_ravel = ravel[self.order]
        ncells = int(self.dims.prod())
        self.starts = np.searchsorted(sorted_ravel, np.arange(ncells))
        ends = np.searchsorted(sorted_ravel, np.arange(ncells), side="right")
        self.counts = ends - self.starts
        self.inv_cell = inv
        grids = np.meshgrid(*([np.array([-1, 0, 1])] * d), indexing="ij")
        self.offsets = np.ascontiguousarray(
            np.stack([off.ravel() for off in grids], axis=1).astype(np.int64)
        )
        self.sorted_atoms = np.ascontiguousarray(atoms[self.order])

    def query_cells(self, xq):
        return np.floor((xq - self.xmin) * self.inv_cell).astype(np.int64)


def _as_g(g, na):
    if g is None:
        return np.empty((na, 0))
    return np.ascontiguousarray(np.asarray(g, dtype=np.float64))


def naive_sums(xq, xa, g, kernel_id, h, prefac):
    """den[k] = sum_l K_h(xq[k]-xa[l]) and columnwise g-weighted sums (raw)."""
    xq = np.ascontiguousarray(xq, dtype=np.float64)
    xa = np.ascontiguousarray(xa, dtype=np.float64)
    g = _as_g(g, xa.shape[0])
    code = kernel_code(kernel_id)
    if xq.shape[1] == 1:
        xq1 = np.ascontiguousarray(xq[:, 0])
        xa1 = np.ascontiguousarray(xa[:, 0])
        if g.shape[1] == 0:
            den = _naive_1d_den(xq1, xa1, code, 1.0 / h, prefac)
            return den, np.empty((xq1.shape[0], 0))
        return _naive_1d(xq1, xa1, g, code, 1.0 / h, prefac)
    return _naive_nd(xq, xa, g, code, 1.0 / h, prefac)


def cell_sums(xq, grid, g, kernel_id, h, prefac):
    """Cell-list version of :func:`naive_sums`; exact for compact kernels."""
    xq = np.ascontiguousarray(xq, dtype=np.float64)
    g = _as_g(g, grid.sorted_atoms.shape[0])
    if g.shape[1]:
        g = np.ascontiguousarray(g[grid.order])
    code = kernel_code(kernel_id)
    if grid.d == 1:
        return _cells_1d(
            np.ascontiguousarray(xq[:, 0]),
            np.ascontiguousarray(grid.sorted_atoms[:, 0]),
            g, grid.starts, grid.counts, int(grid.dims[0]),
            float(grid.xmin[0]), grid.inv_cell, code, 1.0 / h, prefac,
        )
    return _cells_nd(
        xq, grid.sorted_atoms, g, grid.starts, grid.counts, grid.dims,
        grid.strides, grid.xmin, grid.inv_cell, grid.offsets,
        code, 1.0 / h, prefac,
    )
