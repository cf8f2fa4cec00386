"""Counter-based Gaussian streams for reproducible ensemble simulation.

Every random number consumed by the simulator is a pure function of
``(seed, purpose, step, particle, lane)``.  The generator is Philox4x64-10,
evaluated statelessly on explicit counters, so results do not depend on
thread count, evaluation order, or ensemble size: growing an ensemble from
n to n' > n leaves the streams of the first n particles untouched.

Uniforms are mapped to normals with the inverse CDF (``scipy.special.ndtri``),
which is deterministic across platforms.  numpy ships the same Philox
algorithm behind a stateful BitGenerator; it is used as a bit-for-bit test
oracle but cannot address counters vectorially, hence this module.
"""

import numpy as np
from scipy.special import ndtri

# Philox4x64 multipliers and Weyl key increments (Random123 constants).
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# Counter word 0 tags what the draw is for, so initial sampling and step
# noise can never collide even at identical (step, particle, lane).
PURPOSE_INIT = 0
PURPOSE_STEP = 1

_ROUNDS = 10


def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product as (hi, lo), via 32-bit halves."""
    lo = a * b
    ah = a >> _SHIFT32
    al = a & _MASK32
    bh = b >> _SHIFT32
    bl = b & _MASK32
    t = (al * bl) >> _SHIFT32
    t1 = ah * bl + t
    t2 = al * bh + (t1 & _MASK32)
    hi = ah * bh + (t1 >> _SHIFT32) + (t2 >> _SHIFT32)
    return hi, lo


def philox4x64(counters, key):
    """Run Philox4x64-10 on an array of counters.

    Parameters
    ----------
    counters : uint64 array of shape (n, 4)
    key : pair of uint64

    Returns
    -------
    uint64 array of shape (n, 4), the output block per counter.
    """
    counters = np.ascontiguousarray(counters, dtype=np.uint64)
    c0 = counters[:, 0].copy()
    c1 = counters[:, 1].copy()
    c2 = counters[:, 2].copy()
    c3 = counters[:, 3].copy()
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    with np.errstate(over="ignore"):
        for _ in range(_ROUNDS):
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    return np.stack([c0, c1, c2, c3], axis=1)


def _to_unit_interval(words):
    """Map uint64 words to doubles in the open interval (0, 1)."""
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


class CounterRng:
    """Stateless Gaussian stream keyed by a 64-bit seed.

    ``normals(purpose, step, particle_ids, width)`` returns one float64 row
    of ``width`` normals per particle id.  Lane ``c`` of particle ``k`` at a
    given ``(purpose, step)`` always receives the same value, whatever else
    is drawn.
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self._key = (np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF), _W0)

    def uniforms(self, purpose, step, particle_ids, width):
        particle_ids = np.ascontiguousarray(particle_ids, dtype=np.uint64)
        n = particle_ids.shape[0]
        nblk = max(1, -(-width // 4))
        ctr = np.empty((n * nblk, 4), dtype=np.uint64)
        ctr[:, 0] = np.uint64(purpose)
        ctr[:, 1] = np.uint64(step)
        ctr[:, 2] = np.repeat(particle_ids, nblk)
        ctr[:, 3] = np.tile(np.arange(nblk, dtype=np.uint64), n)
        words = philox4x64(ctr, self._key).reshape(n, nblk * 4)
        return _to_unit_interval(words[:, :width])

    def normals(self, purpose, step, particle_ids, width):
        return ndtri(self.uniforms(purpose, step, particle_ids, width))
