import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpinem import fockspace as fs, interaction as it, reconstruction as rc
from qpinem.errors import ConfigError
from qpinem.interaction import Coupling


def test_kernel_frozen_entries():
    K = rc.build_kernel(Coupling(0.1, 0.0), 3, 8)
    assert abs(K.c[1, 1] - 0.010000000000000004) < 1e-18
    assert abs(K.c[2, 3] + 1.6666666666666684e-07) < 1e-20
    assert abs(K.d[1, 1] - 100.0) < 1e-10
    assert abs(K.d[3, 5] - 1259999999.9999995) < 1e-3


def test_kernel_identity():
    for gmag in (0.05, 0.1, 0.3):
        K = rc.build_kernel(Coupling(gmag, 0.0), 6, 12)
        err = rc.kernel_identity_error(K)
        assert err < 1e-8, gmag


def test_kernel_matches_pseudo_inverse():
    # independent linear-algebra oracle: column-rescale c by |g|^{2m} so the
    # pseudo-inverse is numerically trustworthy, then undo the scaling
    g = 0.1
    K = rc.build_kernel(Coupling(g, 0.0), 6, 6)
    c, d = K.c[1:, 1:], K.d[1:, 1:]
    D = np.diag(g ** (2.0 * np.arange(1, 7)))
    dref = np.linalg.inv(D) @ np.linalg.pinv(c @ np.linalg.inv(D))
    mask = np.triu(np.ones((6, 6), bool))          # entries with k >= m
    rel = np.abs(d - dref) / np.abs(dref)
    assert rel[mask].max() < 1e-6


def test_kernel_overflow_rejected():
    # at small |g| and high order the inverse weights overflow doubles
    from qpinem.errors import NumericsError
    with pytest.raises(NumericsError, match="overflow"):
        rc.build_kernel(Coupling(1e-8, 0.0), 20, 40)


def test_moment_roundtrip_coherent():
    g = Coupling(0.1, 0.0)
    stats = fs.coherent_statistics(900.0)
    spec = it.spectrum_approx(stats, g)
    K = rc.build_kernel(g, 3, spec.k_max)
    mv = rc.moments_from_spectrum(spec, K)
    truth = fs.moments(stats, 3)
    for m in (1, 2, 3):
        assert abs(mv[m] / truth[m] - 1.0) < 1e-4, m


def test_moment_errors_estimated():
    g = Coupling(0.1, 0.0)
    spec = it.spectrum_approx(fs.thermal_statistics(100.0), g)
    K = rc.build_kernel(g, 2, spec.k_max)
    mv = rc.moments_from_spectrum(spec, K)
    assert mv.errors_est is not None
    assert np.all(np.asarray(mv.errors_est) >= 0)


def test_statistics_recovery_sparse_support():
    # a mixture on a known small support is recovered by constrained
    # least squares from the electron spectrum alone
    g = Coupling(0.4, 0.0)
    probs = np.zeros(9)
    probs[2], probs[5], probs[8] = 0.3, 0.5, 0.2
    stats = fs.PhotonStatistics(probs, "mixture")
    spec = it.spectrum_exact(stats, g).spectrum
    grid = np.arange(0, 9)
    rec = rc.statistics_from_spectrum(spec, g, grid, exact=True)
    assert np.max(np.abs(rec.probs - probs)) < 1e-6


def test_statistics_recovery_approx_regime():
    g = Coupling(0.1, 0.0)
    stats = fs.thermal_statistics(500.0)
    spec = it.spectrum_approx(stats, g)
    grid = np.arange(0, len(stats.probs), 25)
    rec = rc.statistics_from_spectrum(spec, g, grid)
    assert abs(np.sum(rec.probs) - 1.0) < 1e-6
    # coarse-grained mean should be close
    mean_rec = float(np.dot(grid, rec.probs))
    assert abs(mean_rec / 500.0 - 1.0) < 0.05


def test_moments_to_dict_schema():
    g = Coupling(0.1, 0.0)
    spec = it.spectrum_approx(fs.coherent_statistics(100.0), g)
    K = rc.build_kernel(g, 2, spec.k_max)
    mv = rc.moments_from_spectrum(spec, K)
    doc = rc.moments_to_dict(mv, K)
    assert set(doc) >= {"moments", "errors_est", "kernel"}
    assert len(doc["moments"]) == 2


@given(gmag=st.floats(0.05, 0.5), order=st.integers(1, 5))
@settings(max_examples=20, deadline=None)
def test_kernel_identity_property(gmag, order):
    K = rc.build_kernel(Coupling(gmag, 0.0), order, 2 * order + 2)
    assert rc.kernel_identity_error(K) < 1e-7
