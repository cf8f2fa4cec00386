"""Block-structured drift models and initial-law regularity checks.

A model describes the coupled system

    dX^i = sum_j E[b^i_j(X) | X^j] dt + V^i(X) dt + sqrt(2) sigma dW^i,

with X split into m blocks of dimension d.  Coefficients are plain
vectorized callables; each carries a ``mode`` describing which blocks it
actually reads, which the drift engine exploits:

* ``"query"``  -- depends only on the conditioning block x^j;
* ``"atoms"``  -- depends only on the remaining blocks y^{-j};
* ``"both"``   -- depends on both (general case).

Application presets with unbounded raw coefficients (gradients of quadratic
potentials, linear cost gradients) ship smoothly saturated: every raw value
u is replaced by ``B * tanh(u / B)``.  The saturated system is the one the
convergence theory covers (bounded coefficients with bounded derivatives),
and ``B`` is recorded in the model's ``bounds``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import (
    InvalidParameterError,
    NoOracleAvailableError,
    UnknownPresetError,
    UnsupportedDimensionError,
    UnsupportedLawError,
)
from .kernels import KernelSpec

__all__ = [
    "Coefficient",
    "GaussianLaw",
    "PointMass",
    "ModelSpec",
    "preset",
    "PRESET_NAMES",
    "oracle_drift",
    "check_assumption_R",
    "AssumptionRReport",
    "subexponential_D4_bound",
    "smooth_clamp",
    "spot_check_bounds",
]


def smooth_clamp(u, level):
    """Componentwise saturation ``level * tanh(u / level)``; |result| < level."""
    return level * np.tanh(u / level)


@dataclass(frozen=True)
class Coefficient:
    """One coefficient family b^i_j with its dependency structure.

    ``fn`` signatures by mode (arrays broadcast; trailing axes shown):

    * query: ``fn(xj)`` with xj (..., d) -> (..., d)
    * atoms: ``fn(y)`` with y (..., m-1, d) -> (..., d)
    * both:  ``fn(xj, y)`` -> (..., d)
    """

    fn: object
    mode: str
    bound: float

    def __post_init__(self):
        if self.mode not in ("query", "atoms", "both"):
            raise InvalidParameterError(f"unknown coefficient mode {self.mode!r}")

    def values(self, xj, y):
        """Evaluate with the mixed convention: query block from xj, rest from y."""
        if self.mode == "query":
            return self.fn(xj)
        if self.mode == "atoms":
            return self.fn(y)
        return self.fn(xj, y)


class GaussianLaw:
    """Gaussian initial law on R^(m*d) with closed-form density."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(cov, dtype=np.float64)
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise InvalidParameterError("covariance shape does not match mean")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12, rtol=0.0):
            raise InvalidParameterError("covariance must be symmetric within 1e-12")
        self.chol = np.linalg.cholesky(self.cov)  # raises if not SPD
        self.dim = self.mean.size

    def from_standard_normal(self, z):
        """Map (n, dim) standard normals to samples; the sampling transform."""
        return self.mean + z @ self.chol.T

    def sample(self, seed, n):
        """Seeded sampler; particle k's draw is independent of n (counter streams)."""
        stream = _rng.CounterRng(seed)
        z = stream.normals(_rng.PURPOSE_INIT, 0, np.arange(n, dtype=np.uint64), self.dim)
        return self.from_standard_normal(z)

    def pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mean
        sol = np.linalg.solve(self.cov, x.T).T
        q = np.sum(x * sol, axis=-1)
        det = np.linalg.det(self.cov)
        return np.exp(-0.5 * q) / math.sqrt((2.0 * math.pi) ** self.dim * det)

    @property
    def sup_density(self):
        return 1.0 / math.sqrt((2.0 * math.pi) ** self.dim * np.linalg.det(self.cov))


def standard_normal_law(dim):
    return GaussianLaw(np.zeros(dim), np.eye(dim))


class PointMass:
    """Degenerate initial law: every particle starts at ``x0``."""

    def __init__(self, x0):
        self.x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
        self.dim = self.x0.size

    def from_standard_normal(self, z):
        return np.broadcast_to(self.x0, z.shape).copy()

    def sample(self, seed, n):
        return np.tile(self.x0, (n, 1))


@dataclass
class ModelSpec:
    """Full coefficient description of one model.

    ``b`` maps (i, j) block-index pairs to :class:`Coefficient`; absent pairs
    are identically zero.  ``V`` holds one callable per block (or None for
    zero), mapping the full state (n, m, d) to (n, d).  ``sigma`` is the
    constant scalar diffusion.  Coefficient evaluation must be pure: the
    drift loop fans out over particles freely.
    """

    name: str
    m: int
    d: int
    b: dict
    V: tuple
    sigma: float
    mu0: object
    bounds: dict = field(default_factory=dict)
    oracle: object = None
    oracle_t0_only: bool = False

    @property
    def state_dim(self):
        return self.m * self.d

    def coefficient(self, i, j):
        return self.b.get((i, j))

    def v_values(self, x):
        """Stacked V^i(x) for state x of shape (n, m, d); returns (n, m, d)."""
        n = x.shape[0]
        out = np.zeros((n, self.m, self.d))
        for i, fn in enumerate(self.V):
            if fn is not None:
                out[:, i, :] = fn(x)
        return out


PRESET_NAMES = ("eot-flow", "local-field", "abf", "decoupled-oracle", "frozen-independence")


def _decoupled_oracle():
    # b^i_j(x) = tanh(x^j) for every (i, j): conditioning on a function of the
    # conditioning variable makes the conditional expectation exact, so the
    # limit equation is an ordinary SDE with drift tanh(x^1) + tanh(x^2).
    coeff = Coefficient(fn=np.tanh, mode="query", bound=1.0)
    b = {(i, j): coeff for i in range(2) for j in range(2)}

    def oracle(x, t):
        per_block = np.tanh(x)                      # (n, m, d)
        total = per_block.sum(axis=1, keepdims=True)
        return np.broadcast_to(total, x.shape).copy()

    return ModelSpec(
        name="decoupled-oracle",
        m=2,
        d=1,
        b=b,
        V=(None, None),
        sigma=1.0,
        mu0=standard_normal_law(2),
        bounds={"b": 1.0, "V": 0.0},
        oracle=oracle,
    )


def _frozen_independence():
    # Single coefficient b^1_2 reading only the other block.  At t = 0 the
    # blocks are independent, so E[tanh(X^1) | X^2] = E[tanh(X^1)] = 0 by
    # symmetry of mu0 and oddness of tanh.
    b = {(0, 1): Coefficient(fn=lambda y: np.tanh(y[..., 0, :]), mode="atoms", bound=1.0)}

    def oracle(x, t):
        return np.zeros_like(x)

    return ModelSpec(
        name="frozen-independence",
        m=2,
        d=1,
        b=b,
        V=(None, None),
        sigma=1.0,
        mu0=standard_normal_law(2),
        bounds={"b": 1.0, "V": 0.0},
        oracle=oracle,
        oracle_t0_only=True,
    )


def _eot_flow(saturation, temperature=0.5):
    # Two-marginal transport flow with cost c(x, y) = -x y and quadratic
    # confinements, gradients saturated at `saturation`.  Block drifts:
    #   dX = (E[c_x | X] - c_x - temperature * U'(X)) dt + sqrt(2 temperature) dW
    # so b^i_i = saturated c_gradient (reads the other block only) and V^i
    # collects the local part.
    B = saturation

    def grad_cost(other):
        return smooth_clamp(-other, B)

    b = {
        (0, 0): Coefficient(fn=lambda y: grad_cost(y[..., 0, :]), mode="atoms", bound=B),
        (1, 1): Coefficient(fn=lambda y: grad_cost(y[..., 0, :]), mode="atoms", bound=B),
    }

    def v0(x):
        return -grad_cost(x[:, 1, :]) - temperature * smooth_clamp(x[:, 0, :], B)

    def v1(x):
        return -grad_cost(x[:, 0, :]) - temperature * smooth_clamp(x[:, 1, :], B)

    return ModelSpec(
        name="eot-flow",
        m=2,
        d=1,
        b=b,
        V=(v0, v1),
        sigma=math.sqrt(temperature),
        mu0=standard_normal_law(2),
        bounds={"b": B, "V": B * (1.0 + temperature), "saturation": B},
    )


def _local_field(saturation, neighbors=1):
    # Pair interaction on a regular structure with `neighbors` = m - 1 copies
    # of the conditional term; pair force W'(z) = clamp(z), confinement U' = id.
    B = saturation

    def pair_force(z):
        return smooth_clamp(z, B)

    def make_b():
        def fn(xj, y):
            return -neighbors * pair_force(xj - y[..., 0, :])

        return Coefficient(fn=fn, mode="both", bound=neighbors * B)

    b = {(0, 0): make_b(), (1, 1): make_b()}

    def v0(x):
        return -pair_force(x[:, 0, :] - x[:, 1, :]) - smooth_clamp(x[:, 0, :], B)

    def v1(x):
        return -pair_force(x[:, 1, :] - x[:, 0, :]) - smooth_clamp(x[:, 1, :], B)

    return ModelSpec(
        name="local-field",
        m=2,
        d=1,
        b=b,
        V=(v0, v1),
        sigma=1.0,
        mu0=standard_normal_law(2),
        bounds={"b": neighbors * B, "V": 2.0 * B, "saturation": B},
    )


def _abf(saturation):
    # Free-energy estimation layout: the first block carries the biasing term
    #   dX^1 = -d1 Pot(X) dt + E[d1 Pot(X) | X^1] dt + dW^1,
    # the remaining block relaxes in the full potential.  Pot is a double well
    # in x^1 coupled linearly to x^2; derivatives saturated.
    B = saturation

    def d1_pot(x1, x2):
        return smooth_clamp(x1 * (x1 * x1 - 1.0) + 0.5 * x2, B)

    def d2_pot(x1, x2):
        return smooth_clamp(0.5 * x1 + x2, B)

    b = {
        (0, 0): Coefficient(
            fn=lambda xj, y: d1_pot(xj, y[..., 0, :]), mode="both", bound=B
        )
    }

    def v0(x):
        return -d1_pot(x[:, 0, :], x[:, 1, :])

    def v1(x):
        return -d2_pot(x[:, 0, :], x[:, 1, :])

    return ModelSpec(
        name="abf",
        m=2,
        d=1,
        b=b,
        V=(v0, v1),
        sigma=1.0 / math.sqrt(2.0),
        mu0=standard_normal_law(2),
        bounds={"b": B, "V": B, "saturation": B},
    )


def preset(name, saturation=10.0):
    """Build a shipped model by id.

    ``saturation`` sets the smooth clamp level for presets whose raw
    coefficients are unbounded; it is recorded in ``bounds['saturation']``.
    """
    if name == "decoupled-oracle":
        return _decoupled_oracle()
    if name == "frozen-independence":
        return _frozen_independence()
    if name == "eot-flow":
        return _eot_flow(saturation)
    if name == "local-field":
        return _local_field(saturation)
    if name == "abf":
        return _abf(saturation)
    raise UnknownPresetError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def oracle_drift(model, x, t=0.0):
    """Exact limit drift sum_j E[b^i_j(X_t) | X_t^j = x^j] + V^i(x).

    Only available for models with a closed-form conditional expectation.
    ``x`` may be a single point (m, d) or a batch (n, m, d).
    """
    if model.oracle is None:
        raise NoOracleAvailableError(f"model {model.name!r} has no closed-form limit drift")
    if model.oracle_t0_only and t != 0.0:
        raise NoOracleAvailableError(
            f"model {model.name!r} has a closed-form drift at t = 0 only"
        )
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    out = model.oracle(x, t) + model.v_values(x)
    return out[0] if single else out


def spot_check_bounds(model, n_points=100_000, seed=0, scale=5.0):
    """Monte Carlo sup of |b^i_j| and |V^i| over a broad cloud of states.

    Returns (max_b, max_V); both must stay below the declared bounds.
    """
    g = np.random.default_rng(seed)
    x = scale * g.standard_normal((n_points, model.m, model.d))
    max_b = 0.0
    for (i, j), coeff in model.b.items():
        xj = x[:, j, :]
        y = np.delete(x, j, axis=1)
        vals = coeff.values(xj, y)
        max_b = max(max_b, float(np.max(np.abs(vals))))
    max_v = float(np.max(np.abs(model.v_values(x)))) if any(
        fn is not None for fn in model.V
    ) else 0.0
    return max_b, max_v


def subexponential_D4_bound(score_bound, h, z):
    """Upper bound exp(4 sqrt(h) * score_bound * |z|) on the shifted 4-divergence.

    Valid for laws with uniformly bounded score: the density ratio after a
    shift of sqrt(h) z integrates to at most this value.
    """
    if score_bound < 0:
        raise InvalidParameterError("score_bound must be nonnegative")
    if not h > 0:
        raise InvalidParameterError("h must be positive")
    return math.exp(4.0 * math.sqrt(h) * score_bound * abs(float(np.linalg.norm(np.atleast_1d(z)))))


# ---------------------------------------------------------------------------
# initial-law regularity report
# ---------------------------------------------------------------------------

@dataclass
class AssumptionRReport:
    """Numerical regularity report for a closed-form initial law."""

    r1_values: list          # per conditioning block: shifted-D4 double integral
    r1_finite: list
    r2_all_moments_finite: bool
    r3_abs_log: float        # int |log mu0| dmu0
    r3_score_fourth: float   # int |grad log mu0|^4 dmu0
    r3_laplacian_ratio: float  # int |lap mu0 / mu0|^2 dmu0
    r4_sup_density: float
    r4_positive: bool

    @property
    def passed(self):
        return (
            all(self.r1_finite)
            and self.r2_all_moments_finite
            and all(
                math.isfinite(v)
                for v in (self.r3_abs_log, self.r3_score_fourth, self.r3_laplacian_ratio)
            )
            and math.isfinite(self.r4_sup_density)
            and self.r4_positive
        )


def _gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _r1_gaussian_kernel(inv_var, h, nodes=64):
    """Closed-form inner integral for the Gaussian kernel.

    The shifted 4-divergence of a Gaussian is exp(6 a^2 / var); averaging the
    shift a = sqrt(h)(s u z1 + z2) over independent standard normal z1, z2
    gives (1 - 12 h (s^2 u^2 + 1) / var)^(-1/2), finite only below the
    indicated threshold.
    """
    s, ws = _gauss_legendre(nodes, 0.0, 1.0)
    u, wu = _gauss_legendre(nodes, 0.0, 1.0)
    su2 = np.outer(s, u) ** 2
    arg = 1.0 - 12.0 * h * (su2 + 1.0) * inv_var
    if np.any(arg <= 0.0):
        return math.inf, False
    inner = arg ** -0.5
    val = float(ws @ inner @ wu)
    return val, True


def _r1_compact_kernel(inv_var, h, kernel, nodes=48, z_nodes=96):
    """Quadrature inner integral for compactly supported 1-d kernels."""
    R = kernel.support_radius
    z, wz = _gauss_legendre(z_nodes, -R, R)
    wk = wz * kernel.density(z[:, None])
    s, ws = _gauss_legendre(nodes, 0.0, 1.0)
    u, wu = _gauss_legendre(nodes, 0.0, 1.0)
    su = np.outer(s, u).reshape(-1)
    wsu = np.outer(ws, wu).reshape(-1)
    total = 0.0
    # E_{z1,z2}[exp(6 h (su z1 + z2)^2 / var)], chunked over the (s, u) grid
    for lo in range(0, su.size, 128):
        hi = min(lo + 128, su.size)
        shift = su[lo:hi, None, None] * z[None, :, None] + z[None, None, :]
        vals = np.exp(6.0 * h * inv_var * shift**2)
        inner = np.einsum("i,j,sij->s", wk, wk, vals)
        total += float(wsu[lo:hi] @ inner)
    return total, True


def check_assumption_R(mu0, h, kernel, points=20_001):
    """Regularity report for a Gaussian initial law under a given kernel.

    The four parts: (1) the shifted-4-divergence double integral per
    conditioning coordinate, via the Gaussian closed form (exact finiteness
    threshold for the Gaussian kernel, quadrature for compact kernels);
    (2) all-moments finiteness (automatic for Gaussians); (3) quadrature
    values of the log-density integrals; (4) sup-density and positivity.

    Quadrature parts require state dimension <= 2.
    """
    if isinstance(mu0, str):
        if mu0 == "standard-normal":
            mu0 = standard_normal_law(1)
        else:
            raise UnsupportedLawError(f"unknown named law {mu0!r}")
    if not isinstance(mu0, GaussianLaw):
        raise UnsupportedLawError(
            "assumption-R checks need a closed-form density; got "
            f"{type(mu0).__name__} (only Gaussian laws ship with one)"
        )
    if not isinstance(kernel, KernelSpec):
        raise InvalidParameterError("kernel must be a KernelSpec")
    if kernel.dim != 1:
        raise UnsupportedDimensionError("R.1 quadrature supports block dimension d = 1")
    if not h > 0:
        raise InvalidParameterError("h must be positive")

    dim = mu0.dim
    if dim > 2:
        raise UnsupportedDimensionError("quadrature parts require m*d <= 2")

    prec = np.linalg.inv(mu0.cov)
    r1_values, r1_finite = [], []
    for i in range(dim):
        # shift along coordinate i: effective variance 1 / (Sigma^-1)_{ii}
        inv_var = float(prec[i, i])
        if kernel.compact:
            val, finite = _r1_compact_kernel(inv_var, h, kernel)
        else:
            val, finite = _r1_gaussian_kernel(inv_var, h)
        r1_values.append(val)
        r1_finite.append(finite)

    r3 = _r3_quadrature(mu0, points)

    return AssumptionRReport(
        r1_values=r1_values,
        r1_finite=r1_finite,
        r2_all_moments_finite=True,
        r3_abs_log=r3[0],
        r3_score_fourth=r3[1],
        r3_laplacian_ratio=r3[2],
        r4_sup_density=mu0.sup_density,
        r4_positive=True,
    )


def _r3_quadrature(law, points):
    """Quadrature of the three log-density integrals for a Gaussian law."""
    dim = law.dim
    sd = math.sqrt(float(np.max(np.diag(law.cov))))
    L = 14.0 * sd

    def integrand_parts(x):
        p = law.pdf(x)
        centered = x - law.mean
        score = -np.linalg.solve(law.cov, centered.T).T  # grad log p
        logp = np.log(p)
        prec = np.linalg.inv(law.cov)
        # lap p / p = |score|^2 - tr(Sigma^-1)
        lap_ratio = np.sum(score * score, axis=-1) - np.trace(prec)
        return (
            np.abs(logp) * p,
            np.sum(score * score, axis=-1) ** 2 * p,
            lap_ratio**2 * p,
        )

    if dim == 1:
        x = np.linspace(law.mean[0] - L, law.mean[0] + L, points)
        w = np.full(points, x[1] - x[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        parts = integrand_parts(x[:, None])
        return tuple(float(np.dot(w, v)) for v in parts)

    npts = min(points, 2001)
    x = np.linspace(-L, L, npts)
    w = np.full(npts, x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    totals = [0.0, 0.0, 0.0]
    for i in range(npts):
        pts = np.column_stack([np.full(npts, law.mean[0] + x[i]), law.mean[1] + x])
        parts = integrand_parts(pts)
        for t in range(3):
            totals[t] += w[i] * float(np.dot(w, parts[t]))
    return tuple(totals)
