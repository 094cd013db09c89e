"""Independent brute-force engine: build g b a† - g* b† a on the truncated
electron-ladder ⊗ photon space and exponentiate it numerically.

This deliberately shares no code with the analytic amplitude path; it is the
ground truth every other engine is tested against.  The ladder window is
open (no cyclic wraparound) with explicit leakage accounting.
"""

import numpy as np
from scipy.sparse import diags, kron, identity
from scipy.sparse.linalg import expm_multiply

from .errors import ConfigError, NumericsError
from .fockspace import PhotonicState, PhotonStatistics
from .interaction import (Coupling, ElectronSpectrum, JointDistribution,
                          InteractionOutcome, _as_coupling)

MAX_JOINT_DIM = 800000


def _ladder_down(dim):
    # b|k> = |k-1>: column k has its 1 in row k-1
    return diags(np.ones(dim - 1), 1)


def _adag(dim):
    return diags(np.sqrt(np.arange(1, dim)), -1)


def oracle_spectrum(state, g, ladder_half_width, lo=None, lo_cutoff=None,
                    leak_tol=1e-10):
    """Numerically exact InteractionOutcome on the truncated joint space.

    lo: optional complex LO amplitude; when given, the LO is a second
    *quantum* mode prepared in a coherent state and the electron passes
    the LO stage first.  Intended for small cross-check instances only.
    """
    g = _as_coupling(g)
    K = int(ladder_half_width)
    ke = 2 * K + 1
    if isinstance(state, PhotonStatistics):
        rho = np.diag(state.probs).astype(complex)
        label = state.label
    else:
        rho = state.matrix
        label = state.label
    N = rho.shape[0]
    n_lo = 0
    if lo is not None:
        lo = complex(lo)
        if lo_cutoff is None:
            lo_cutoff = int(abs(lo) ** 2 + 8 * abs(lo) + 16)
        n_lo = lo_cutoff
    dim = ke * N * (n_lo if n_lo else 1)
    if dim > MAX_JOINT_DIM:
        raise ConfigError(
            f"oracle joint dimension {dim} exceeds {MAX_JOINT_DIM}; "
            "shrink the instance")
    b = _ladder_down(ke)
    gval = g.value
    evals, evecs = np.linalg.eigh(rho)
    P = np.zeros(ke)
    joint = np.zeros((N, ke))
    if lo is None:
        G = kron(b, _adag(N)) * gval - kron(b.T, _adag(N).T) * np.conj(gval)
        for i in range(N):
            if evals[i] < 1e-14:
                continue
            v = np.zeros(ke * N, dtype=complex)
            v[K * N:(K + 1) * N] = evecs[:, i]
            w = expm_multiply(G.tocsc(), v)
            pr = np.abs(w) ** 2
            blk = pr.reshape(ke, N)
            P += evals[i] * blk.sum(axis=1)
            joint += evals[i] * blk.T
    else:
        nl = np.arange(n_lo)
        from scipy.special import gammaln
        if abs(lo) > 0:
            clo = np.exp(-abs(lo) ** 2 / 2 + nl * np.log(abs(lo))
                         - 0.5 * gammaln(nl + 1)) * np.exp(1j * nl * np.angle(lo))
        else:
            clo = (nl == 0).astype(complex)
        I_q = identity(N)
        I_lo = identity(n_lo)
        G1 = (kron(kron(b, _adag(n_lo)), I_q) * gval
              - kron(kron(b.T, _adag(n_lo).T), I_q) * np.conj(gval))
        G2 = (kron(kron(b, I_lo), _adag(N)) * gval
              - kron(kron(b.T, I_lo), _adag(N).T) * np.conj(gval))
        for i in range(N):
            if evals[i] < 1e-14:
                continue
            v = np.zeros(ke * n_lo * N, dtype=complex)
            v[K * n_lo * N:(K + 1) * n_lo * N] = np.kron(clo, evecs[:, i])
            w = expm_multiply(G2.tocsc(), expm_multiply(G1.tocsc(), v))
            pr = np.abs(w) ** 2
            blk = pr.reshape(ke, n_lo * N)
            P += evals[i] * blk.sum(axis=1)
            joint += evals[i] * blk.reshape(ke, n_lo, N).sum(axis=1).T
    mass = P.sum()
    # boundary occupation signals ladder clipping; total deficit signals
    # photon-space clipping (the generator itself is norm preserving)
    if max(P[0], P[-1]) > leak_tol or abs(1.0 - mass) > 1e-6:
        raise NumericsError(
            f"oracle truncation leakage: boundary {max(P[0], P[-1]):.3e}, "
            f"mass deficit {abs(1 - mass):.3e}; enlarge ladder/cutoff")
    spec = ElectronSpectrum(-K, K, P, float(abs(1.0 - mass)), "oracle",
                            g.magnitude, label)
    jd = JointDistribution(joint, -K, K)
    post = PhotonStatistics(jd.marginal_n(), label + "+electron")
    return InteractionOutcome(spec, post, jd)
