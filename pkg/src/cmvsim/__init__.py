"""Particle simulation of conditional mean-field SDEs.

The drift of every block is a kernel-regression estimate of a conditional
expectation, floored away from zero in the denominator.  The package covers
the moving parts needed to study convergence of that scheme at desk scale:
kernels and their bandwidth scaling (:mod:`cmvsim.kernels`), model presets
(:mod:`cmvsim.models`), the drift functional and its accelerated evaluation
(:mod:`cmvsim.nwdrift`), ensemble time integration with counter-based
randomness (:mod:`cmvsim.simulate`), an information-divergence toolkit
(:mod:`cmvsim.divergences`), the bandwidth/floor schedule
(:mod:`cmvsim.schedule`) and a CLI harness (:mod:`cmvsim.harness`).
"""

from .divergences import (
    DiscreteDistribution,
    Histogram,
    chi2,
    d_p,
    gaussian_kl,
    gaussian_renyi_D,
    histogram_tv,
    inequality_suite,
    kl,
    mollification_entropy,
    tv,
)
from .kernels import (
    KernelSpec,
    ScaledKernel,
    check_assumption_K,
    epanechnikov,
    eval_scaled,
    gaussian,
    get_kernel,
    second_moment,
    uniform_ball,
)
from .models import (
    Coefficient,
    GaussianLaw,
    ModelSpec,
    PointMass,
    check_assumption_R,
    oracle_drift,
    preset,
    subexponential_D4_bound,
)
from .nwdrift import (
    DriftParams,
    WeightedMeasure,
    floor_hit_rate,
    nw_block,
    particle_drift,
)
from .schedule import SchedulePoint, optimize_rate, rate_bound, schedule
from .simulate import (
    ParticleEnsemble,
    SimConfig,
    init_ensemble,
    run,
    run_oracle,
    step,
)

__version__ = "0.1.0"
