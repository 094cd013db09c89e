"""Inverse pipeline: electron spectrum -> photon-number moments / statistics.

The forward map in the weak-coupling regime is
    P_k = sum_m c_km <n^m>,   c_km = (-1)^{m-k} |g|^{2m} (2m)! / [(m-k)!(m+k)!(m!)²]
and it has an analytic inverse
    <n^m> = sum_{k>=m} d_mk P_k
with all-positive d_mk built from factorials and double factorials.  Both
matrices are evaluated in log space with explicit sign tracking; entries
blow up like |g|^{-2m}, which is the intrinsic conditioning of the problem,
not an artifact.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, jv
from scipy.optimize import nnls

from .errors import ConfigError, NumericsError
from .fockspace import MomentVector, PhotonStatistics
from .interaction import Coupling, ElectronSpectrum, _as_coupling

LOG_OVERFLOW = 700.0   # ~ log of double-precision max


def _log_fact(n):
    return gammaln(np.asarray(n, float) + 1.0)


def _log_dfact(n):
    """log of the double factorial n!!, with (-1)!! = 0!! = 1."""
    n = int(n)
    if n <= 0:
        return 0.0
    if n % 2 == 1:
        j = (n + 1) // 2
        return gammaln(2 * j + 1) - j * np.log(2.0) - gammaln(j + 1)
    j = n // 2
    return j * np.log(2.0) + gammaln(j + 1)


@dataclass(frozen=True)
class MomentKernel:
    g_magnitude: float
    order: int                  # M
    peaks: int                  # K
    c: np.ndarray               # c[k, m], rows k = 0..K, cols m = 0..M (0 rows unused)
    d: np.ndarray               # d[m, k]


def build_kernel(g, order, peaks=None):
    """Forward matrix c_km and its analytic inverse d_mk.

    peaks defaults to the window where d_1k terms have decayed well below
    the leading ones for typical spectra (k ~ several times 2 beta is
    plenty; callers pass the measured k_max).
    """
    g = _as_coupling(g)
    M = int(order)
    if M < 1:
        raise ConfigError("moment order must be >= 1")
    if g.magnitude <= 0:
        raise ConfigError("kernel needs |g| > 0")
    K = int(peaks) if peaks is not None else max(4 * M, 20)
    if K < M:
        raise ConfigError(f"need at least as many peaks as moments (K={K} < M={M})")
    lg = np.log(g.magnitude)
    c = np.zeros((K + 1, M + 1))
    for k in range(1, K + 1):
        for m in range(k, M + 1):
            val = (2 * m * lg + _log_fact(2 * m) - _log_fact(m - k)
                   - _log_fact(m + k) - 2 * _log_fact(m))
            if val > LOG_OVERFLOW:
                raise NumericsError(
                    f"kernel overflow at (k={k}, m={m}); max feasible order "
                    f"at |g|={g.magnitude:g} is smaller than {M}")
            c[k, m] = (-1.0) ** (m - k) * np.exp(val)
    d = np.zeros((M + 1, K + 1))
    for m in range(1, M + 1):
        for k in range(m, K + 1):
            f1 = (k - m + 1) // 2
            f2 = (k - m) // 2
            val = (f1 * np.log(2.0) + np.log(k) + _log_fact(m) - 2 * m * lg
                   + _log_fact(m - 1 + f1) + _log_dfact(2 * m + 2 * f2 - 1)
                   - _log_fact(k - m) - _log_dfact(2 * m - 1))
            if val > LOG_OVERFLOW:
                raise NumericsError(
                    f"kernel overflow at (m={m}, k={k}); reduce the order "
                    f"or peak count")
            d[m, k] = np.exp(val)
    return MomentKernel(g.magnitude, M, K, c, d)


def kernel_identity_error(kernel):
    """max |d·c - I| over the M×M block; the module's own invariant."""
    M = kernel.order
    I = kernel.d[1:, 1:] @ kernel.c[1:, 1:]
    return float(np.max(np.abs(I - np.eye(M))))


def moments_from_spectrum(spectrum, kernel):
    """<n^m> = sum_{k=m..K} d_mk P_k over the positive-k peaks.

    The returned MomentVector carries a truncation-remainder estimate per
    moment (the last included term, an upper-bound proxy since the summand
    decays fast once k is past the spectral support).
    """
    ks, P = spectrum.positive_side()
    if len(ks) < kernel.peaks:
        raise ConfigError(
            f"spectrum reaches k={len(ks)} but the kernel wants {kernel.peaks} peaks")
    M = kernel.order
    vals = np.zeros(M)
    rem = np.zeros(M)
    warn = []
    for m in range(1, M + 1):
        terms = kernel.d[m, m:kernel.peaks + 1] * P[m - 1:kernel.peaks]
        vals[m - 1] = terms.sum()
        rem[m - 1] = abs(terms[-1]) if len(terms) else 0.0
        if vals[m - 1] < 0:
            warn.append(m)
    if warn:
        import warnings
        warnings.warn(
            f"negative reconstructed moments at m={warn}: spectrum is "
            "noise-dominated at these orders", RuntimeWarning)
    return MomentVector(M, vals, rem)


def statistics_from_spectrum(spectrum, g, support, regularization=0.0,
                             exact=False):
    """Non-negative least squares inversion P_k = sum_n |J_k(2|g| sqrt n)|² p_n.

    support: the candidate n grid (coarse for wide distributions).  A sum
    constraint row enforces sum p_n = total spectral mass.  Returns the
    statistics on the support grid plus the residual as metadata via the
    label.  If the kernel submatrix is rank-deficient a small Tikhonov term
    is engaged and reported.  exact=True builds the design matrix from the
    exact transition amplitudes instead of the weak-coupling Bessel form
    (support must be integer then).
    """
    g = _as_coupling(g)
    support = np.asarray(support, dtype=float)
    if np.any(support < 0):
        raise ConfigError("support must be non-negative photon numbers")
    ks = spectrum.ks
    A = np.empty((len(ks), len(support)))
    if exact:
        from .interaction import amplitude_exact
        if np.max(np.abs(support - np.round(support))) > 0:
            raise ConfigError("exact inversion needs an integer support grid")
        for i, k in enumerate(ks):
            for j, n in enumerate(np.round(support).astype(int)):
                A[i, j] = (abs(amplitude_exact(n - k, k, g)) ** 2
                           if n - k >= 0 else 0.0)
    else:
        for i, k in enumerate(ks):
            A[i] = jv(k, 2.0 * g.magnitude * np.sqrt(support)) ** 2
    b = spectrum.probs.astype(float)
    # normalization constraint, weighted to dominate
    w = 10.0
    A_full = np.vstack([A, w * np.ones((1, len(support)))])
    b_full = np.concatenate([b, [w * b.sum()]])
    if regularization > 0:
        A_full = np.vstack([A_full, regularization * np.eye(len(support))])
        b_full = np.concatenate([b_full, np.zeros(len(support))])
    sol, res = nnls(A_full, b_full)
    if regularization == 0.0 and not np.all(np.isfinite(sol)):
        return statistics_from_spectrum(spectrum, g, support, 1e-6)
    total = sol.sum()
    if total <= 0:
        raise NumericsError("statistics inversion returned an empty distribution")
    return PhotonStatistics(sol / total,
                            f"reconstructed(residual={res:.3e})")


def moments_to_dict(mv, kernel):
    return {"moments": mv.values.tolist(),
            "errors_est": (mv.errors_est.tolist()
                           if mv.errors_est is not None else None),
            "method": "analytic-kernel-inversion",
            "kernel": {"g": kernel.g_magnitude, "M": kernel.order,
                       "K": kernel.peaks}}


def statistics_to_csv(stats):
    lines = ["n,p"]
    for n, p in enumerate(stats.probs):
        lines.append(f"{n},{float(p)!r}")
    return "\n".join(lines) + "\n"


def statistics_from_csv(text, label=""):
    ns, ps = [], []
    for line in text.strip().splitlines()[1:]:
        n, p = line.split(",")
        ns.append(int(float(n)))
        ps.append(float(p))
    probs = np.zeros(max(ns) + 1)
    probs[np.asarray(ns)] = ps
    return PhotonStatistics(probs, label)
