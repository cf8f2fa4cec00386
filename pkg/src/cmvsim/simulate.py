"""Euler time integration of the interacting ensemble and of oracle limits.

Randomness contract
-------------------
All Gaussian increments come from counter-based streams (:mod:`cmvsim.rng`):
the increment of particle ``k``, block ``i``, component ``c`` at step ``s``
is a pure function of ``(seed, k, i*d + c, s)``.  Consequences relied on by
tests: identical configs give bit-identical trajectories whatever the
worker count, and growing the ensemble never perturbs existing particles'
noise.  Initial sampling uses a separate stream purpose, so step noise can
never collide with it.

Snapshot format
---------------
Binary snapshots are little-endian: magic ``CMVSNAP1`` (8 bytes), then
uint64 n, m, d, seed, float64 t, 32-byte config digest, then the positions
as n*m*d row-major float64.  No timestamps are stored, so identical runs
produce identical bytes.  ``ensemble_to_csv`` writes the same data as long
rows (particle, block, component, value).
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, SimulationDivergedError
from .kernels import get_kernel
from .models import preset as model_preset
from .nwdrift import DriftParams, particle_drift
from .rng import PURPOSE_STEP, CounterRng
from .schedule import schedule as _auto_schedule

__all__ = [
    "ParticleEnsemble",
    "SimConfig",
    "Trajectory",
    "init_ensemble",
    "step",
    "run",
    "run_oracle",
    "write_snapshot",
    "read_snapshot",
    "ensemble_to_csv",
    "snapshot_bytes",
]

_MAGIC = b"CMVSNAP1"


@dataclass
class ParticleEnsemble:
    """Positions (n, m, d) at time t; ids address the noise streams."""

    positions: np.ndarray
    t: float
    ids: np.ndarray = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 3:
            raise InvalidParameterError("positions must be (n, m, d)")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidParameterError("positions must be finite")
        if self.ids is None:
            self.ids = np.arange(self.positions.shape[0], dtype=np.uint64)
        else:
            self.ids = np.ascontiguousarray(self.ids, dtype=np.uint64)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def m(self):
        return self.positions.shape[1]

    @property
    def d(self):
        return self.positions.shape[2]


@dataclass
class SimConfig:
    """One run description; ``resolve()`` fills defaults and validates.

    When ``h``/``epsilon`` are omitted they are derived from ``n`` via the
    optimal-coupling schedule with constants ``schedule_C``/``schedule_r``.
    """

    model: str
    n: int
    T: float
    dt: float = 0.01
    seed: int = 0
    kernel: str = "gaussian"
    strategy: str = "naive"
    h: float = None
    epsilon: float = None
    schedule_C: float = 1.0
    schedule_r: float = 0.5
    record_times: tuple = None
    saturation: float = 10.0
    workers: int = None

    def resolve(self):
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        if self.T < self.dt:
            raise InvalidParameterError("T must be at least dt")
        cfg = self
        if cfg.h is None or cfg.epsilon is None:
            point = _auto_schedule(
                max(cfg.n, 2), d=model_preset(cfg.model, cfg.saturation).d,
                r=cfg.schedule_r, C=cfg.schedule_C,
            )
            cfg = replace(
                cfg,
                h=cfg.h if cfg.h is not None else point.h,
                epsilon=cfg.epsilon if cfg.epsilon is not None else point.epsilon,
            )
        if cfg.record_times is None:
            cfg = replace(cfg, record_times=(cfg.T,))
        rts = tuple(float(t) for t in cfg.record_times)
        for t in rts:
            if t < 0 or t > cfg.T + 1e-12:
                raise InvalidParameterError(f"record time {t} outside [0, T]")
        return replace(cfg, record_times=rts)

    def digest(self):
        # workers is an execution detail: it never changes the trajectory,
        # so it stays out of the run identity
        cfg = self.resolve()
        parts = [
            f"{name}={getattr(cfg, name)!r}"
            for name in sorted(cfg.__dataclass_fields__)
            if name != "workers"
        ]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()


@dataclass
class Trajectory:
    """Recorded snapshots plus per-step diagnostics of one run."""

    snapshots: list
    diagnostics: list
    config: SimConfig
    final: ParticleEnsemble


def init_ensemble(model, n, seed):
    """n independent seeded draws from the model's initial law at t = 0."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    flat = model.mu0.sample(seed, n)
    return ParticleEnsemble(flat.reshape(n, model.m, model.d), t=0.0)


def _noise(rng, step_index, ensemble, sigma, dt):
    width = ensemble.m * ensemble.d
    xi = rng.normals(PURPOSE_STEP, step_index, ensemble.ids, width)
    return math.sqrt(2.0 * dt) * sigma * xi.reshape(ensemble.positions.shape)


def step(ensemble, model, params, dt, rng, step_index, strategy="naive",
         workers=None, return_denominators=False):
    """One Euler update X' = X + drift(X) dt + sqrt(2 dt) sigma xi.

    ``step_index`` addresses the noise stream; the run loop passes
    consecutive integers starting at 0.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    out = particle_drift(
        ensemble, model, params, strategy=strategy, workers=workers,
        return_denominators=return_denominators,
    )
    drift, dens = out if return_denominators else (out, None)
    if not np.all(np.isfinite(drift)):
        raise SimulationDivergedError("non-finite drift", step_index)
    new_pos = (
        ensemble.positions
        + drift * dt
        + _noise(rng, step_index, ensemble, model.sigma, dt)
    )
    if not np.all(np.isfinite(new_pos)):
        raise SimulationDivergedError("non-finite position", step_index)
    new = ParticleEnsemble(new_pos, t=ensemble.t + dt, ids=ensemble.ids)
    if return_denominators:
        return new, drift, dens
    return new


def _n_steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > dt:
        raise InvalidParameterError(f"horizon T={T} not within one step of a dt={dt} grid")
    return n


def _diag_row(step_index, t, drift, dens, epsilon, positions):
    row = {
        "step": step_index,
        "t": t,
        "drift_max": float(np.max(np.abs(drift))),
    }
    for j in range(dens.shape[0]):
        row[f"floor_hit_rate_b{j}"] = float(np.mean(dens[j] < epsilon))
    for i in range(positions.shape[1]):
        blk = positions[:, i, :]
        row[f"mean_b{i}"] = float(np.mean(blk))
        row[f"var_b{i}"] = float(np.var(blk))
    return row


def run(config, model=None, collect_diagnostics=True):
    """Integrate a config from 0 to T; returns a :class:`Trajectory`.

    Snapshots are taken at the grid times nearest each requested record
    time.  Diagnostics per step: drift max-norm, per-block floor hit rates,
    per-block ensemble mean and variance.
    """
    cfg = config.resolve()
    if model is None:
        model = model_preset(cfg.model, cfg.saturation)
    kernel = get_kernel(cfg.kernel, model.d)
    params = DriftParams(h=cfg.h, epsilon=cfg.epsilon, kernel=kernel)
    rng = CounterRng(cfg.seed)
    ens = init_ensemble(model, cfg.n, cfg.seed)
    nsteps = _n_steps(cfg.T, cfg.dt)

    record_steps = {}
    for t in cfg.record_times:
        record_steps.setdefault(int(round(t / cfg.dt)), t)

    snapshots = []
    diagnostics = []
    if 0 in record_steps:
        snapshots.append((0.0, ens.positions.copy()))

    interacting = bool(model.b)
    for s in range(nsteps):
        if collect_diagnostics and interacting:
            ens_new, drift, dens = step(
                ens, model, params, cfg.dt, rng, s,
                strategy=cfg.strategy, workers=cfg.workers,
                return_denominators=True,
            )
            diagnostics.append(
                _diag_row(s, ens.t, drift, dens, cfg.epsilon, ens.positions)
            )
        else:
            ens_new = step(
                ens, model, params, cfg.dt, rng, s,
                strategy=cfg.strategy, workers=cfg.workers,
            )
        ens = ens_new
        if s + 1 in record_steps:
            snapshots.append((ens.t, ens.positions.copy()))

    return Trajectory(snapshots=snapshots, diagnostics=diagnostics, config=cfg, final=ens)


def run_oracle(model, n_copies, config):
    """Integrate ``n_copies`` independent copies of the limit equation.

    Uses the model's closed-form drift (no interaction); the update rule and
    noise addressing are identical to :func:`run`, so a model with zero
    interaction coefficients reproduces the particle run bit for bit under a
    shared seed.
    """
    cfg = config.resolve()
    rng = CounterRng(cfg.seed)
    flat = model.mu0.sample(cfg.seed, n_copies)
    ens = ParticleEnsemble(flat.reshape(n_copies, model.m, model.d), t=0.0)
    nsteps = _n_steps(cfg.T, cfg.dt)

    record_steps = {}
    for t in cfg.record_times:
        record_steps.setdefault(int(round(t / cfg.dt)), t)

    snapshots = []
    if 0 in record_steps:
        snapshots.append((0.0, ens.positions.copy()))
    from .models import oracle_drift  # local import to keep module deps one-way

    for s in range(nsteps):
        drift = oracle_drift(model, ens.positions, ens.t)
        if not np.all(np.isfinite(drift)):
            raise SimulationDivergedError("non-finite oracle drift", s)
        new_pos = ens.positions + drift * cfg.dt + _noise(rng, s, ens, model.sigma, cfg.dt)
        if not np.all(np.isfinite(new_pos)):
            raise SimulationDivergedError("non-finite position", s)
        ens = ParticleEnsemble(new_pos, t=ens.t + cfg.dt, ids=ens.ids)
        if s + 1 in record_steps:
            snapshots.append((ens.t, ens.positions.copy()))

    return Trajectory(snapshots=snapshots, diagnostics=[], config=cfg, final=ens)


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------

def snapshot_bytes(ensemble, seed, config_digest=""):
    n, m, d = ensemble.positions.shape
    digest = bytes.fromhex(config_digest) if config_digest else b"\x00" * 32
    if len(digest) != 32:
        raise InvalidParameterError("config digest must be 32 bytes of hex")
    header = _MAGIC + struct.pack(
        "<QQQQd", n, m, d, seed & 0xFFFFFFFFFFFFFFFF, float(ensemble.t)
    ) + digest
    body = np.ascontiguousarray(ensemble.positions, dtype="<f8").tobytes()
    return header + body


def write_snapshot(path, ensemble, seed, config_digest=""):
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(ensemble, seed, config_digest))


def read_snapshot(path):
    """Returns (ensemble, seed, config_digest_hex)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise InvalidParameterError(f"{path} is not a snapshot file")
    n, m, d, seed, t = struct.unpack("<QQQQd", blob[8:48])
    digest = blob[48:80].hex()
    positions = np.frombuffer(blob[80:], dtype="<f8").reshape(n, m, d).copy()
    return ParticleEnsemble(positions, t=t), seed, digest


def ensemble_to_csv(path, ensemble):
    """Long-form CSV with columns particle, block, component, value."""
    n, m, d = ensemble.positions.shape
    with open(path, "w") as fh:
        fh.write("particle,block,component,value\n")
        for k in range(n):
            for i in range(m):
                for c in range(d):
                    fh.write(f"{k},{i},{c},{ensemble.positions[k, i, c]!r}\n")
