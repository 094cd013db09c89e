"""Homodyne tomography with free electrons, plus the modified coherence
functions of the delayed-pair (HBT-like) configuration.

The local oscillator is a strong classical beam at phase theta; the
composite photon-number observable seen through the electron ladder is
    n_c = |A|² + a†a + 2|A| X(theta),
so the first two inverted moments of the theta-scan give the mean and
variance of the rotated quadrature after subtracting the LO-only and
quantum-only baselines.  Var X(theta) over theta determines the Gaussian
covariance, which closes the one cross term <n_hat X> that the subtraction
leaves behind (iterated to convergence).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .errors import ConfigError, NumericsError
from . import fockspace, interaction, reconstruction
from .fockspace import PhotonicState, WignerGrid
from .interaction import Coupling, ElectronSpectrum, _as_coupling


@dataclass(frozen=True)
class HomodyneScan:
    thetas: np.ndarray
    spectra: list                       # ElectronSpectrum per theta
    lo_amplitude: complex
    g: Coupling
    lo_only: ElectronSpectrum = None
    quantum_only: ElectronSpectrum = None
    state_label: str = ""

    def to_csv(self):
        lines = ["theta,k,probability"]
        for th, sp in zip(self.thetas, self.spectra):
            for k, p in zip(sp.ks, sp.probs):
                lines.append(f"{float(th)!r},{k},{float(p)!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class QuadratureDistribution:
    theta: float
    x_grid: np.ndarray
    density: np.ndarray
    mean: float = None
    variance: float = None


@dataclass(frozen=True)
class CoherenceResult:
    taus: np.ndarray
    g1_mod: np.ndarray
    g2_mod: np.ndarray
    bandwidth: float
    spectra: list = field(default=None)   # ElectronSpectrum per tau (optional)

    def to_csv(self):
        lines = ["tau,g1_mod,g2_mod"]
        for t, g1, g2 in zip(self.taus, self.g1_mod, self.g2_mod):
            lines.append(f"{float(t)!r},{float(g1)!r},{float(g2)!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# forward scan

def homodyne_scan(state, lo_ratio, g, thetas=None, engine="approx",
                  lo_first=True):
    """theta-sweep of two-stage spectra plus LO-only / quantum-only baselines.

    engine "approx" feeds the quantitative moment pipeline; "amplitude"
    keeps the exact displacement interference (used for the cat-vs-mixture
    difference maps).
    """
    if lo_ratio < 10:
        raise ConfigError("LO must dominate: lo_ratio >= 10")
    g = _as_coupling(g)
    if thetas is None:
        thetas = np.linspace(0.0, np.pi, 20, endpoint=False)
    thetas = np.asarray(thetas, float)
    A = np.sqrt(lo_ratio * max(state.mean_n, 1.0))
    spectra = [interaction.two_point_spectrum(state, A, th, g, engine=engine,
                                              lo_first=lo_first)
               for th in thetas]
    vac = fockspace.make_fock(0, 8)
    lo_only = interaction.two_point_spectrum(vac, A, 0.0, g, engine=engine)
    quantum_only = interaction.spectrum_approx(fockspace.statistics(state), g)
    return HomodyneScan(thetas, spectra, complex(A), g, lo_only, quantum_only,
                        state.label)


# ---------------------------------------------------------------------------
# moment extraction

def _invert_two_moments(spec, g):
    kernel = reconstruction.build_kernel(g, 2, spec.k_max)
    mv = reconstruction.moments_from_spectrum(spec, kernel)
    return mv[1], mv[2]


def quadrature_from_scan(scan, order=2, x_grid=None, closure_iterations=8):
    """Quadrature mean/variance per theta from the electron data alone.

    order 2 (Gaussian closure) is what the electron pipeline determines
    directly; the densities are the corresponding moment-matched Gaussians.
    Higher orders would need closures the delayed cross terms do not
    support, so they are rejected rather than silently approximated.
    """
    if order < 2:
        raise ConfigError("need at least order 2 for a density")
    if order > 2:
        raise ConfigError(
            "orders beyond 2 are not extractable with the Gaussian closure; "
            "use analytic_marginals for non-Gaussian references")
    g = scan.g
    A = abs(scan.lo_amplitude)
    A2 = A * A
    q1, q2 = _invert_two_moments(scan.quantum_only, g)
    m1s = np.empty(len(scan.thetas))
    m2s = np.empty(len(scan.thetas))
    for i, sp in enumerate(scan.spectra):
        m1s[i], m2s[i] = _invert_two_moments(sp, g)
    th = scan.thetas
    mu = (m1s - A2 - q1) / (2.0 * A)
    cross = np.zeros(len(th))
    x2 = None
    for _ in range(closure_iterations):
        x2 = (m2s - A2 ** 2 - q2 - 2.0 * A2 * q1 - 4.0 * A ** 3 * mu
              - 2.0 * A * cross) / (4.0 * A2)
        var = x2 - mu ** 2
        # Gaussian covariance fit over the angle sweep
        X = np.column_stack([np.cos(th) ** 2, np.sin(th) ** 2, np.sin(2 * th)])
        V11, V22, V12 = np.linalg.lstsq(X, var, rcond=None)[0]
        muP = np.interp(th + np.pi / 2.0,
                        np.concatenate([th, th + np.pi]),
                        np.concatenate([mu, -mu]))
        Spp = V11 * np.sin(th) ** 2 + V22 * np.cos(th) ** 2 - V12 * np.sin(2 * th)
        Sxx = V11 * np.cos(th) ** 2 + V22 * np.sin(th) ** 2 + V12 * np.sin(2 * th)
        Sxp = 0.5 * (V22 - V11) * np.sin(2 * th) + V12 * np.cos(2 * th)
        # <n X> closure for a Gaussian state, from Wick pairings of X(0)²X + P²X
        cross = (2 * mu ** 3 + 6 * mu * Sxx + 2 * mu * muP ** 2
                 + 2 * mu * Spp + 4 * muP * Sxp - mu)
    var = x2 - mu ** 2
    if np.any(var <= 0):
        raise NumericsError("extracted quadrature variances are not positive; "
                            "moment set inconsistent with any density")
    if x_grid is None:
        half = np.max(np.abs(mu)) + 5.0 * np.sqrt(np.max(var))
        x_grid = np.linspace(-half, half, 201)
    out = []
    for i in range(len(th)):
        dens = np.exp(-(x_grid - mu[i]) ** 2 / (2 * var[i])) / np.sqrt(2 * np.pi * var[i])
        out.append(QuadratureDistribution(float(th[i]), x_grid, dens,
                                          float(mu[i]), float(var[i])))
    return out


def analytic_marginals(state, thetas, x_grid):
    """Exact quadrature distributions of a state (tomography reference)."""
    out = []
    for th in thetas:
        dens = fockspace.quadrature_marginal(state, th, x_grid)
        out.append(QuadratureDistribution(float(th), np.asarray(x_grid, float),
                                          dens,
                                          fockspace.quadrature_mean(state, th),
                                          fockspace.quadrature_variance(state, th)))
    return out


# ---------------------------------------------------------------------------
# inverse Radon (filtered back-projection)

def inverse_radon(distributions, x_axis=None, p_axis=None):
    """Filtered back-projection of quadrature marginals onto W(x, p).

    Ramp filter with Hann apodization at the grid Nyquist; angles must
    cover [0, pi) roughly uniformly (>= 20 of them).
    """
    if len(distributions) < 20:
        raise ConfigError("inverse Radon needs at least 20 angles over [0, pi)")
    r = distributions[0].x_grid
    n = len(r)
    dr = r[1] - r[0]
    for d in distributions[1:]:
        if len(d.x_grid) != n or abs(d.x_grid[0] - r[0]) > 1e-12:
            raise ConfigError("all marginals must share one x grid")
    if x_axis is None:
        x_axis = r.copy()
    if p_axis is None:
        p_axis = r.copy()
    # zero-pad to keep the long negative tails of the filtered projections:
    # clipping them at the grid edge biases the recovered normalization
    n_pad = 3 * n + (1 - (3 * n) % 2)
    k0 = (n_pad - n) // 2
    r_pad = r[0] - k0 * dr + np.arange(n_pad) * dr
    # discrete Ram-Lak kernel (real space), Hann apodized at the Nyquist
    m = np.arange(n_pad)
    dist = np.minimum(m, n_pad - m)
    h = np.zeros(n_pad)
    h[0] = 1.0 / (4.0 * dr * dr)
    odd = dist % 2 == 1
    h[odd] = -1.0 / (np.pi * dist[odd] * dr) ** 2
    H = np.real(np.fft.fft(h))
    freqs = np.fft.fftfreq(n_pad, d=dr)
    H *= 0.5 * (1.0 + np.cos(np.pi * freqs / np.abs(freqs).max()))
    Xg, Pg = np.meshgrid(x_axis, p_axis, indexing="ij")
    W = np.zeros(Xg.shape)
    n_th = len(distributions)
    for d in distributions:
        pr = np.zeros(n_pad)
        pr[k0:k0 + n] = d.density
        q = np.real(np.fft.ifft(np.fft.fft(pr) * H)) * dr
        t = Xg * np.cos(d.theta) + Pg * np.sin(d.theta)
        W += np.interp(t, r_pad, q)
    W *= np.pi / n_th
    return WignerGrid(np.asarray(x_axis, float), np.asarray(p_axis, float), W)


def wigner_to_csv(grid):
    lines = ["x,p,w"]
    for i, x in enumerate(grid.x_axis):
        for j, p in enumerate(grid.p_axis):
            lines.append(f"{float(x)!r},{float(p)!r},{float(grid.values[i, j])!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# modified coherence functions (delayed-pair interaction)

def _gamma(tau, bandwidth):
    return np.exp(-0.5 * (bandwidth * tau) ** 2)


def coherence_scan(source, mean_n, bandwidth, g, taus=None, with_spectra=True,
                   phase_samples=64):
    """g1_mod / g2_mod curves and the electron spectra map over delay tau.

    The delayed field a(tau) keeps first-order coherence
    gamma(tau) = exp(-(bandwidth*tau)²/2) with the lost coherence going to
    an independent mode; the electron couples to b = (a(0)+a(tau))/2 with
    [b, b†] = kappa = (1+gamma)/2.  Everything downstream follows from the
    second-order moments of b†b:
        g2_mod(tau) = 2 R(tau) - R(0),
        R(tau) = (<n_b²> - <n_b>) / <n_b>².
    """
    if source not in ("coherent", "thermal"):
        raise ConfigError("coherence sources are 'coherent' or 'thermal'")
    if not 0.0 < bandwidth <= 0.5:
        raise ConfigError("bandwidth must lie in (0, 0.5] (fraction of omega)")
    mean_n = float(mean_n)
    if mean_n <= 0:
        raise ConfigError("coherence needs mean_n > 0")
    g = _as_coupling(g)
    if taus is None:
        taus = np.linspace(0.0, 6.0 / bandwidth, 61)
    taus = np.asarray(taus, float)
    gam = _gamma(taus, bandwidth)
    kap = 0.5 * (1.0 + gam)
    mu = kap * mean_n
    if source == "thermal":
        # Wick expansion of the Gaussian pair: <n_b²> = 2 mu² + kappa mu
        nb2 = 2.0 * mu ** 2 + kap * mu
    else:
        # c-number amplitudes, random relative phase averaged out
        beta4 = kap ** 2 * mean_n ** 2 + (mean_n ** 2 / 8.0) * (1 + gam) ** 3 * (1 - gam)
        nb2 = beta4 + kap * mu
    R = (nb2 - mu) / mu ** 2
    # reference value at tau = 0 (gamma = 1, kappa = 1), independent of the
    # requested delay grid
    R0 = 2.0 if source == "thermal" else 1.0
    g2 = 2.0 * R - R0
    g1 = gam.copy()
    spectra = None
    if with_spectra:
        spectra = []
        for t_i in range(len(taus)):
            g_eff = Coupling(2.0 * np.sqrt(kap[t_i]) * g.magnitude, g.phase)
            if source == "thermal":
                # the combined mode b/sqrt(kappa) stays thermal with mean mean_n
                sp = interaction.spectrum_closed_form(
                    "thermal", {"mean_n": mean_n}, g_eff)
            else:
                sp = _coherent_pair_spectrum(mean_n, gam[t_i], g, phase_samples)
            spectra.append(sp)
    return CoherenceResult(taus, g1, g2, bandwidth, spectra)


def _coherent_pair_spectrum(mean_n, gamma, g, phase_samples):
    """Electron spectrum for the delayed coherent pair, phase averaged.

    The instantaneous configuration is classical with interaction strength
    2|g||beta(psi)|, beta(psi) = (alpha/2)[(1+gamma) + sqrt(1-gamma²) e^{i psi}].
    """
    alpha = np.sqrt(mean_n)
    psis = (np.arange(phase_samples) + 0.5) * 2.0 * np.pi / phase_samples
    betas = 0.5 * alpha * np.abs((1.0 + gamma)
                                 + np.sqrt(1.0 - gamma ** 2) * np.exp(1j * psis))
    bmax = float(betas.max()) * abs(g.magnitude if isinstance(g, Coupling) else g)
    h = interaction.default_k_half_width(2.0 * bmax)
    ks = np.arange(-h, h + 1)
    P = np.zeros(len(ks))
    for b in betas:
        P += jv(ks, 4.0 * g.magnitude * b) ** 2
    P /= phase_samples
    return ElectronSpectrum(-h, h, P, float(abs(1 - P.sum())), "closed_form",
                            g.magnitude, f"coherent_pair(gamma={gamma:.4g})")


def coherence_map_csv(result):
    """Long-format CSV of the P_k(tau) spectra map."""
    lines = ["tau,k,probability"]
    for t, sp in zip(result.taus, result.spectra):
        for k, p in zip(sp.ks, sp.probs):
            lines.append(f"{float(t)!r},{k},{float(p)!r}")
    return "\n".join(lines) + "\n"
