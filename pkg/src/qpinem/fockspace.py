"""Quantum states of light on a truncated Fock basis.

Conventions used throughout the package:
    X(theta) = (a e^{-i theta} + a† e^{i theta})/2, vacuum variance 1/4,
    vacuum Wigner peak W(0,0) = 2/pi, squeezing S(xi) = exp[(xi* a² - xi a†²)/2].

Large mean-photon-number pipelines only ever need the diagonal p_n, so the
family constructors come in two flavours: full density matrices
(PhotonicState) and diagonal-only PhotonStatistics fast paths.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, NumericsError

DEFAULT_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class PhotonicState:
    cutoff: int
    matrix: np.ndarray          # complex Hermitian, trace ~ 1
    label: str = ""
    tail_mass: float = 0.0      # probability discarded above the cutoff

    @property
    def diagonal(self):
        return np.real(np.diag(self.matrix))

    @property
    def mean_n(self):
        return float(np.dot(self.diagonal, np.arange(self.cutoff)))


@dataclass(frozen=True)
class PhotonStatistics:
    probs: np.ndarray           # p_n, n = 0..len-1
    label: str = ""

    @property
    def mean_n(self):
        return float(np.dot(self.probs, np.arange(len(self.probs))))


@dataclass(frozen=True)
class MomentVector:
    order: int
    values: np.ndarray          # <n^m> for m = 1..order
    errors_est: np.ndarray = field(default=None)

    def __getitem__(self, m):
        if not 1 <= m <= self.order:
            raise IndexError(f"moment order {m} outside 1..{self.order}")
        return float(self.values[m - 1])


@dataclass(frozen=True)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray          # values[i, j] = W(x_axis[i], p_axis[j])

    def integral(self):
        dx = self.x_axis[1] - self.x_axis[0]
        dp = self.p_axis[1] - self.p_axis[0]
        return float(self.values.sum() * dx * dp)


# ---------------------------------------------------------------------------
# construction helpers

def default_cutoff(mean_n, family="coherent", tail_tol=DEFAULT_TAIL_TOL):
    """Cutoff heuristic keeping the discarded tail below tail_tol."""
    mean_n = float(mean_n)
    if family == "thermal":
        # geometric tail: (n/(n+1))^c < tail_tol
        nb = max(mean_n, 1e-3)
        return int(np.ceil(np.log(tail_tol) / np.log(nb / (nb + 1.0)))) + 8
    if family in ("squeezed", "squeezed_vacuum"):
        # squeezed tails decay like thermal ones, with margin for the
        # oscillating even/odd structure
        return int(np.ceil(2.0 * max(mean_n, 1.0) * np.log(1.0 / tail_tol))) + 16
    # Poisson-like
    return int(np.ceil(mean_n + 8.0 * np.sqrt(mean_n) + 17.0))


def _check_tail(probs_ext, cutoff, tail_tol, what):
    """probs_ext covers more than cutoff entries; reject heavy tails."""
    total = probs_ext.sum()
    tail = float(probs_ext[cutoff:].sum() / total) if total > 0 else 0.0
    if tail > tail_tol:
        # walk out until the tail would pass, to give an actionable hint
        csum = np.cumsum(probs_ext) / total
        ok = np.nonzero(csum >= 1.0 - tail_tol)[0]
        hint = int(ok[0]) + 1 if len(ok) else 2 * len(probs_ext)
        raise ConfigError(
            f"{what}: cutoff {cutoff} leaves tail mass {tail:.3e} > {tail_tol:g}; "
            f"need cutoff >= {hint}")
    return tail


def _pure_state(vec, label, tail_mass):
    vec = np.asarray(vec, dtype=complex)
    rho = np.outer(vec, vec.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return PhotonicState(cutoff=len(vec), matrix=rho, label=label,
                         tail_mass=tail_mass)


def coherent_vector(alpha, cutoff):
    """Fock coefficients of |alpha> in log space (no factorial overflow)."""
    alpha = complex(alpha)
    n = np.arange(cutoff)
    if abs(alpha) == 0:
        v = np.zeros(cutoff, dtype=complex)
        v[0] = 1.0
        return v
    logmag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def make_coherent(alpha, cutoff=None, tail_tol=DEFAULT_TAIL_TOL):
    alpha = complex(alpha)
    need = abs(alpha) ** 2 + 8 * abs(alpha) + 16
    if cutoff is None:
        cutoff = default_cutoff(abs(alpha) ** 2, "coherent", tail_tol)
    if cutoff <= need:
        raise ConfigError(
            f"coherent cutoff {cutoff} too small for |alpha|={abs(alpha):.3g}; "
            f"need cutoff > {need:.1f}")
    ext = coherent_vector(alpha, cutoff + 32)
    tail = _check_tail(np.abs(ext) ** 2, cutoff, tail_tol, "coherent")
    return _pure_state(ext[:cutoff], f"coherent(alpha={alpha:.6g})", tail)


def make_fock(n, cutoff):
    n = int(n)
    if n < 0:
        raise ConfigError("Fock index must be non-negative")
    if n >= cutoff:
        raise ConfigError(f"Fock index {n} needs cutoff > {n}")
    v = np.zeros(cutoff, dtype=complex)
    v[n] = 1.0
    return _pure_state(v, f"fock({n})", 0.0)


def thermal_statistics(mean_n, n_max=None, tail_tol=DEFAULT_TAIL_TOL):
    mean_n = float(mean_n)
    if mean_n < 0:
        raise ConfigError("thermal mean photon number must be >= 0")
    if n_max is None:
        n_max = default_cutoff(mean_n, "thermal", tail_tol)
    n = np.arange(n_max)
    if mean_n == 0:
        p = (n == 0).astype(float)
    else:
        r = mean_n / (mean_n + 1.0)
        p = np.exp(n * np.log(r) - np.log(mean_n + 1.0))
    return PhotonStatistics(p, f"thermal(mean={mean_n:g})")


def make_thermal(mean_n, cutoff=None, tail_tol=DEFAULT_TAIL_TOL):
    if cutoff is None:
        cutoff = default_cutoff(float(mean_n), "thermal", tail_tol)
    stats = thermal_statistics(mean_n, cutoff + 32, tail_tol)
    tail = _check_tail(stats.probs, cutoff, tail_tol, "thermal")
    rho = np.diag(stats.probs[:cutoff]).astype(complex)
    return PhotonicState(cutoff, rho, f"thermal(mean={float(mean_n):g})", tail)


def squeezed_vector(alpha, r, phi, cutoff):
    """Fock coefficients of D(alpha) S(r e^{2i phi}) |0>.

    Uses the eigenvector recurrence (mu a + nu a†)|psi> = (mu alpha + nu alpha*)|psi>
    with mu = cosh r, nu = e^{2i phi} sinh r; bounded and stable for the
    squeezing strengths of interest here (r <~ 3).
    """
    alpha = complex(alpha)
    mu = np.cosh(r)
    nu = np.exp(2j * phi) * np.sinh(r)
    lam = mu * alpha + nu * np.conj(alpha)
    c = np.zeros(cutoff, dtype=complex)
    c[0] = 1.0
    if cutoff > 1:
        c[1] = lam / mu
    for n in range(1, cutoff - 1):
        c[n + 1] = (lam * c[n] - nu * np.sqrt(n) * c[n - 1]) / (mu * np.sqrt(n + 1.0))
    return c / np.linalg.norm(c)


def make_squeezed(alpha, r, phi=0.0, cutoff=None, tail_tol=DEFAULT_TAIL_TOL):
    if r < 0:
        raise ConfigError("squeezing parameter r must be >= 0")
    mean_est = abs(alpha) ** 2 + np.sinh(r) ** 2
    if cutoff is None:
        cutoff = max(default_cutoff(mean_est, "squeezed", tail_tol), 32)
    ext = squeezed_vector(alpha, r, phi, cutoff + 64)
    tail = _check_tail(np.abs(ext) ** 2, cutoff, tail_tol, "squeezed")
    v = ext[:cutoff] / np.linalg.norm(ext[:cutoff]) * np.sqrt(1.0 - tail)
    return _pure_state(v, f"squeezed(alpha={complex(alpha):.4g},r={r:g},phi={phi:g})",
                       tail)


def squeezed_vacuum_statistics(mean_n, n_max=None, tail_tol=DEFAULT_TAIL_TOL):
    """p_n of squeezed vacuum with sinh²r = mean_n, in log space.

    p_{2m} = (2m)! / (2^{2m} (m!)²) * mean^m / (mean+1)^{m+1/2}, odd p_n = 0.
    """
    mean_n = float(mean_n)
    if mean_n < 0:
        raise ConfigError("mean photon number must be >= 0")
    if n_max is None:
        n_max = default_cutoff(mean_n, "squeezed", tail_tol)
    p = np.zeros(n_max)
    if mean_n == 0:
        p[0] = 1.0
    else:
        m = np.arange((n_max + 1) // 2)
        lg = (gammaln(2 * m + 1) - 2 * m * np.log(2.0) - 2 * gammaln(m + 1)
              + m * np.log(mean_n / (mean_n + 1.0)) - 0.5 * np.log(mean_n + 1.0))
        p[0:n_max:2] = np.exp(lg)
    return PhotonStatistics(p, f"squeezed_vacuum(mean={mean_n:g})")


def coherent_statistics(mean_n, n_max=None, tail_tol=DEFAULT_TAIL_TOL):
    mean_n = float(mean_n)
    if mean_n < 0:
        raise ConfigError("mean photon number must be >= 0")
    if n_max is None:
        n_max = default_cutoff(mean_n, "coherent", tail_tol)
    n = np.arange(n_max)
    if mean_n == 0:
        p = (n == 0).astype(float)
    else:
        p = np.exp(-mean_n + n * np.log(mean_n) - gammaln(n + 1))
    return PhotonStatistics(p, f"coherent(mean={mean_n:g})")


def fock_statistics(n, n_max=None):
    n = int(n)
    if n_max is None:
        n_max = n + 1
    if n >= n_max:
        raise ConfigError(f"Fock index {n} needs n_max > {n}")
    p = np.zeros(n_max)
    p[n] = 1.0
    return PhotonStatistics(p, f"fock({n})")


def make_cat(alpha, parity=+1, cutoff=None, tail_tol=DEFAULT_TAIL_TOL):
    """Normalized |alpha> + parity·|-alpha> superposition."""
    alpha = complex(alpha)
    parity = int(parity)
    if parity not in (+1, -1):
        raise ConfigError("parity must be +1 (even) or -1 (odd)")
    if abs(alpha) == 0 and parity == -1:
        raise ConfigError("odd cat with alpha = 0 has zero norm")
    need = abs(alpha) ** 2 + 8 * abs(alpha) + 16
    if cutoff is None:
        cutoff = default_cutoff(abs(alpha) ** 2, "coherent", tail_tol)
    if cutoff <= need:
        raise ConfigError(
            f"cat cutoff {cutoff} too small; need cutoff > {need:.1f}")
    ext = coherent_vector(alpha, cutoff + 32) + parity * coherent_vector(-alpha, cutoff + 32)
    nrm = np.linalg.norm(ext)
    tail = _check_tail(np.abs(ext) ** 2, cutoff, tail_tol, "cat")
    v = ext[:cutoff] / nrm
    sign = "+" if parity > 0 else "-"
    return _pure_state(v, f"cat(alpha={alpha:.4g},{sign})", tail)


def make_mixed_pair(alpha, cutoff=None, tail_tol=DEFAULT_TAIL_TOL):
    """Statistical mixture (|a><a| + |-a><-a|)/2 of the same two amplitudes."""
    alpha = complex(alpha)
    need = abs(alpha) ** 2 + 8 * abs(alpha) + 16
    if cutoff is None:
        cutoff = default_cutoff(abs(alpha) ** 2, "coherent", tail_tol)
    if cutoff <= need:
        raise ConfigError(
            f"mixed-pair cutoff {cutoff} too small; need cutoff > {need:.1f}")
    vp = coherent_vector(alpha, cutoff + 32)
    vm = coherent_vector(-alpha, cutoff + 32)
    tail = _check_tail(0.5 * (np.abs(vp) ** 2 + np.abs(vm) ** 2), cutoff,
                       tail_tol, "mixed pair")
    vp, vm = vp[:cutoff], vm[:cutoff]
    rho = 0.5 * (np.outer(vp, vp.conj()) + np.outer(vm, vm.conj()))
    rho = 0.5 * (rho + rho.conj().T)
    return PhotonicState(cutoff, rho, f"mixed_pair(alpha={alpha:.4g})", tail)


def from_matrix(matrix, label="", tail_mass=0.0, check=True):
    """Ingest an externally supplied density matrix (symmetrized, validated)."""
    rho = np.asarray(matrix, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ConfigError("density matrix must be square")
    rho = 0.5 * (rho + rho.conj().T)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > 1e-9 + tail_mass:
        raise ConfigError(f"trace {tr} deviates from 1 beyond tolerance")
    if check:
        w = np.linalg.eigvalsh(rho)
        if w.min() < -1e-9:
            raise NumericsError(f"density matrix not PSD: min eigenvalue {w.min():.3e}")
    return PhotonicState(rho.shape[0], rho, label, tail_mass)


# ---------------------------------------------------------------------------
# observables

def statistics(state):
    """Diagonal p_n = <n|rho|n> of a PhotonicState (pass-through for stats)."""
    if isinstance(state, PhotonStatistics):
        return state
    return PhotonStatistics(state.diagonal.copy(), state.label)


def moments(stats, order):
    """Exact power sums <n^m> = sum_n p_n n^m for m = 1..order."""
    if order < 1:
        raise ConfigError("moment order must be >= 1")
    p = stats.probs if isinstance(stats, PhotonStatistics) else statistics(stats).probs
    n = np.arange(len(p), dtype=float)
    vals = np.array([np.dot(p, n ** m) for m in range(1, order + 1)])
    return MomentVector(order, vals)


def purity(state):
    return float(np.real(np.trace(state.matrix @ state.matrix)))


def quadrature_mean(state, theta=0.0):
    N = state.cutoff
    a = np.diag(np.sqrt(np.arange(1, N)), 1)
    X = 0.5 * (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta))
    return float(np.real(np.trace(state.matrix @ X)))


def quadrature_variance(state, theta=0.0):
    """Var X(theta) with X = (a e^{-i theta} + a† e^{i theta})/2."""
    N = state.cutoff
    a = np.diag(np.sqrt(np.arange(1, N)), 1)
    X = 0.5 * (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta))
    m = np.real(np.trace(state.matrix @ X))
    m2 = np.real(np.trace(state.matrix @ X @ X))
    return float(m2 - m * m)


def quadrature_marginal(state, theta, x_grid):
    """Exact distribution pr(x | theta) of the rotated quadrature.

    Uses oscillator basis functions scaled so the vacuum marginal has
    variance 1/4 (psi_n(x) = 2^{1/4} h_n(sqrt(2) x) with h_n the unit-norm
    Hermite functions).
    """
    x = np.asarray(x_grid, dtype=float)
    N = state.cutoff
    y = np.sqrt(2.0) * x
    B = np.zeros((N, len(x)))
    B[0] = 2.0 ** 0.25 * np.pi ** -0.25 * np.exp(-y * y / 2.0)
    if N > 1:
        B[1] = np.sqrt(2.0) * y * B[0]
    for n in range(2, N):
        B[n] = (y * np.sqrt(2.0 / n) * B[n - 1]
                - np.sqrt((n - 1.0) / n) * B[n - 2])
    ph = np.exp(-1j * theta * np.arange(N))
    rho_th = state.matrix * np.outer(ph, ph.conj())
    pr = np.einsum('ni,nm,mi->i', B, rho_th, B)
    return np.maximum(np.real(pr), 0.0)


def wigner(state, x_axis=None, p_axis=None):
    """Wigner function on a rectangular grid (iterative Fock-basis method).

    W is normalized so that  ∬ W dx dp = 1  and vacuum peaks at 2/pi under
    the X = (a+a†)/2 scaling.
    """
    if x_axis is None:
        half = np.sqrt(state.mean_n) + 4.0
        x_axis = np.linspace(-half, half, 201)
    if p_axis is None:
        p_axis = x_axis.copy()
    x_axis = np.asarray(x_axis, float)
    p_axis = np.asarray(p_axis, float)
    rho = state.matrix
    N = state.cutoff
    # displaced-parity form: W(beta) = (2/pi) sum_nm rho_nm (-1)^m <m|D(-2 beta)|n>
    # with beta = x + i p; the displacement elements come from the same
    # bounded Laguerre recurrence used for the scattering amplitudes.
    gamma = -2.0 * (x_axis[:, None] + 1j * p_axis[None, :])
    gabs = np.abs(gamma)
    x = gabs * gabs
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(gabs > 0, gamma / np.where(gabs > 0, gabs, 1.0), 1.0)
    sgn = (-1.0) ** np.arange(N)
    W = np.zeros(gamma.shape)
    for d in range(N):
        if d == 0:
            a_prev = np.exp(-x / 2.0)
        else:
            with np.errstate(divide="ignore"):
                a_prev = np.where(
                    gabs > 0,
                    np.exp(d * np.log(np.where(gabs > 0, gabs, 1.0))
                           - x / 2.0 - 0.5 * gammaln(d + 1)),
                    0.0)
        a_prev2 = None
        ph = u ** d
        for n in range(0, N - d):
            if n == 1:
                a_prev2, a_prev = a_prev, (1.0 + d - x) / np.sqrt(1.0 + d) * a_prev
            elif n >= 2:
                a_new = ((2 * n - 1 + d - x) / np.sqrt(n * (n + d)) * a_prev
                         - np.sqrt((n - 1) * (n - 1 + d) / (n * (n + d))) * a_prev2)
                a_prev2, a_prev = a_prev, a_new
            m = n + d
            elem = ph * a_prev          # <m|D(gamma)|n>
            if d == 0:
                W += np.real(rho[n, n]) * sgn[m] * np.real(elem)
            else:
                W += 2.0 * sgn[m] * np.real(rho[n, m] * elem)
    return WignerGrid(x_axis, p_axis, (2.0 / np.pi) * W)


# ---------------------------------------------------------------------------
# serialization

def state_to_dict(state):
    d = {"cutoff": int(state.cutoff), "label": state.label,
         "diag": state.diagonal.tolist()}
    rho = state.matrix
    if np.max(np.abs(rho - np.diag(np.diag(rho)))) > 1e-15:
        inter = np.empty(2 * rho.size)
        inter[0::2] = np.real(rho).ravel()
        inter[1::2] = np.imag(rho).ravel()
        d["matrix"] = inter.tolist()
    return d


def state_from_dict(d):
    cutoff = int(d["cutoff"])
    if "matrix" in d and d["matrix"] is not None:
        inter = np.asarray(d["matrix"], float)
        rho = (inter[0::2] + 1j * inter[1::2]).reshape(cutoff, cutoff)
    else:
        rho = np.diag(np.asarray(d["diag"], float)).astype(complex)
    return from_matrix(rho, d.get("label", ""), tail_mass=1e-9, check=True)


def save_state(state, path):
    with open(path, "w") as f:
        json.dump(state_to_dict(state), f)


def load_state(path):
    with open(path) as f:
        return state_from_dict(json.load(f))
