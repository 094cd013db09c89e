"""Finite-statistics simulation of the electron measurement.

Sampling uses the counter-based Philox generator keyed by (seed,
realization index), so realizations are independent substreams and every
report is bit-reproducible regardless of execution order.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from . import fockspace, interaction, reconstruction
from .fockspace import PhotonStatistics
from .interaction import Coupling, ElectronSpectrum, _as_coupling


@dataclass(frozen=True)
class ExperimentConfig:
    electrons: int
    realizations: int = 100
    g: Coupling = None
    g_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.electrons < 1:
            raise ConfigError("electrons must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.g_jitter < 0:
            raise ConfigError("g_jitter must be >= 0")


@dataclass(frozen=True)
class PrecisionReport:
    n_values: np.ndarray            # electron counts swept
    rel_errors: np.ndarray          # [i_N, m-1] mean |rel deviation|
    order: int
    failures: int = 0

    def slope(self, m=1):
        """Fitted log-log scaling exponent of the error vs N for moment m."""
        y = self.rel_errors[:, m - 1]
        good = y > 0
        if good.sum() < 2:
            raise ConfigError("not enough points to fit a slope")
        coef = np.polyfit(np.log(self.n_values[good]), np.log(y[good]), 1)
        return float(coef[0])

    def to_csv(self):
        lines = ["N,m,rel_error"]
        for i, N in enumerate(self.n_values):
            for m in range(1, self.order + 1):
                lines.append(f"{int(N)},{m},{float(self.rel_errors[i, m - 1])!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class JitterReport:
    jitters: np.ndarray
    deviations: np.ndarray          # [i_jit, m-1] signed relative deviation
    slopes: np.ndarray              # fitted d(rel dev)/d(rel jitter) per m

    def to_csv(self):
        lines = ["jitter,m,rel_deviation"]
        for i, j in enumerate(self.jitters):
            for m in range(1, self.deviations.shape[1] + 1):
                lines.append(f"{float(j)!r},{m},{float(self.deviations[i, m - 1])!r}")
        return "\n".join(lines) + "\n"


def _rng(seed, realization=0):
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1),
                                                     int(realization)]))


def sample_spectrum(spectrum, n_electrons, seed, realization=0):
    """Empirical spectrum from n_electrons categorical draws (inverse CDF)."""
    if n_electrons < 1:
        raise ConfigError("need at least one electron")
    p = np.maximum(spectrum.probs, 0.0)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = _rng(seed, realization).random(int(n_electrons))
    idx = np.searchsorted(cdf, u, side="right")
    counts = np.bincount(idx, minlength=len(p)).astype(float)
    return ElectronSpectrum(spectrum.k_min, spectrum.k_max,
                            counts / n_electrons, 0.0, "sampled",
                            spectrum.g_magnitude, spectrum.state_label)


DEFAULT_N_GRID = (100, 1000, 10000, 100000)


def precision_curve(state, g, config, order=3, n_grid=DEFAULT_N_GRID):
    """Mean |relative moment deviation| vs electron count.

    Truth moments come straight from the input statistics; each sampled
    spectrum is inverted with the analytic kernel on its positive peaks.
    """
    g = _as_coupling(g)
    stats = fockspace.statistics(state) if not isinstance(state, PhotonStatistics) else state
    truth = fockspace.moments(stats, order).values
    spec = interaction.spectrum_approx(stats, g)
    kernel = reconstruction.build_kernel(g, order, spec.k_max)
    errs = np.zeros((len(n_grid), order))
    failures = 0
    for i, N in enumerate(n_grid):
        acc = np.zeros(order)
        for r in range(config.realizations):
            samp = sample_spectrum(spec, N, config.seed, r * len(n_grid) + i)
            try:
                import warnings
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    mv = reconstruction.moments_from_spectrum(samp, kernel)
                acc += np.abs(mv.values / truth - 1.0)
            except Exception:
                failures += 1
        errs[i] = acc / config.realizations
    return PrecisionReport(np.asarray(n_grid, float), errs, order, failures)


def jitter_sensitivity(state, g, jitter_grid=None, order=3):
    """Moment bias from a miscalibrated |g| (spectra at |g|(1+eps),
    inversion with the nominal kernel).  Slopes are fitted per moment."""
    g = _as_coupling(g)
    if jitter_grid is None:
        jitter_grid = np.linspace(-0.05, 0.05, 11)
    jitter_grid = np.asarray(jitter_grid, float)
    if np.max(np.abs(jitter_grid)) > 0.2:
        raise ConfigError("jitter model is linear-response; keep |jitter| <= 20%")
    stats = fockspace.statistics(state) if not isinstance(state, PhotonStatistics) else state
    truth = fockspace.moments(stats, order).values
    spec0 = interaction.spectrum_approx(stats, g)
    kernel = reconstruction.build_kernel(g, order, spec0.k_max)
    devs = np.zeros((len(jitter_grid), order))
    for i, eps in enumerate(jitter_grid):
        gp = Coupling(g.magnitude * (1.0 + eps), g.phase)
        sp = interaction.spectrum_approx(stats, gp, (spec0.k_min, spec0.k_max))
        mv = reconstruction.moments_from_spectrum(sp, kernel)
        devs[i] = mv.values / truth - 1.0
    slopes = np.array([np.polyfit(jitter_grid, devs[:, m], 1)[0]
                       for m in range(order)])
    return JitterReport(jitter_grid, devs, slopes)


@dataclass(frozen=True)
class BudgetReport:
    n_e_needed: int
    back_action_prediction: float       # quadrature-variance growth
    destructive: bool
    regime_ok: bool                     # beta ~ 1 while |g| << 1
    state_variance: float
    drift_per_electron: list = field(default=None)

    def to_dict(self):
        return {"n_e_needed": self.n_e_needed,
                "back_action_prediction": self.back_action_prediction,
                "destructive": self.destructive,
                "regime_ok": self.regime_ok,
                "state_variance": self.state_variance,
                "drift_per_electron": self.drift_per_electron}


def single_shot_budget(state, g, target_moment_error, order=1,
                       drift_samples=3):
    """Electron budget for a single-pulse measurement, and its price.

    The estimator variance of <n> from one multinomial draw of N electrons
    is Var = (sum_k d_1k² P_k - <n>²)/N over the positive peaks; the mean
    absolute relative deviation is sqrt(2 Var / (pi N)) / <n>, which sets
    N_e.  Back-action is the predicted variance growth N_e |g|²/2 compared
    with the state's own quadrature variance.
    """
    g = _as_coupling(g)
    if target_moment_error <= 0:
        raise ConfigError("target error must be positive")
    stats = fockspace.statistics(state) if not isinstance(state, PhotonStatistics) else state
    mean = stats.mean_n
    if mean <= 0:
        raise ConfigError("budgeting needs a non-vacuum state")
    spec = interaction.spectrum_approx(stats, g)
    kernel = reconstruction.build_kernel(g, 1, spec.k_max)
    ks, P = spec.positive_side()
    d1 = kernel.d[1, 1:kernel.peaks + 1]
    est_mean = float(np.dot(d1, P))
    var1 = float(np.dot(d1 ** 2, P) - est_mean ** 2)
    n_e = int(np.ceil(2.0 * var1 / (np.pi * (target_moment_error * mean) ** 2)))
    n_e = max(n_e, 1)
    growth = n_e * g.magnitude ** 2 / 2.0
    if isinstance(state, PhotonStatistics) or not interaction._has_coherences(
            getattr(state, "matrix", np.zeros((1, 1)))):
        state_var = (2.0 * mean + 1.0) / 4.0
    else:
        state_var = fockspace.quadrature_variance(state, 0.0)
    beta = g.beta(mean)
    regime_ok = (beta >= 0.5) and (g.magnitude <= 0.3)
    drift = None
    if drift_samples:
        _, devs = interaction.traced_back_action(stats, g,
                                                 min(drift_samples, n_e))
        drift = [float(x) for x in devs]
    return BudgetReport(n_e, growth, bool(growth > state_var), regime_ok,
                        float(state_var), drift)
