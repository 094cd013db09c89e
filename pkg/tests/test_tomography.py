import numpy as np
import pytest

from qpinem import fockspace as fs, tomography as tg
from qpinem.errors import ConfigError
from qpinem.interaction import Coupling


G = Coupling(0.1, 0.0)


def test_homodyne_scan_schema():
    state = fs.make_coherent(1.0)
    scan = tg.homodyne_scan(state, 100.0, G, np.linspace(0, np.pi, 8,
                                                         endpoint=False))
    text = scan.to_csv()
    assert text.splitlines()[0] == "theta,k,probability"
    assert len(scan.spectra) == 8


def test_homodyne_rejects_weak_lo():
    with pytest.raises(ConfigError, match="lo_ratio"):
        tg.homodyne_scan(fs.make_coherent(1.0), 2.0, G)


def test_quadrature_recovery_coherent():
    alpha = 1.0 + 0.6j
    state = fs.make_coherent(alpha)
    thetas = np.linspace(0, np.pi, 12, endpoint=False)
    scan = tg.homodyne_scan(state, 100.0, G, thetas)
    dists = tg.quadrature_from_scan(scan)
    for d in dists:
        want_mean = alpha.real * np.cos(d.theta) + alpha.imag * np.sin(d.theta)
        assert abs(d.mean - want_mean) < 1e-6
        assert abs(d.variance - 0.25) < 1e-4


def test_quadrature_recovery_squeezed():
    state = fs.make_squeezed(0.0, 0.8, 0.0, cutoff=70)
    thetas = np.linspace(0, np.pi, 12, endpoint=False)
    scan = tg.homodyne_scan(state, 100.0, G, thetas)
    dists = tg.quadrature_from_scan(scan)
    for d in dists:
        want = fs.quadrature_variance(state, d.theta)
        assert abs(d.variance / want - 1.0) < 1e-4


def test_quadrature_from_scan_order_limited():
    state = fs.make_coherent(1.0)
    scan = tg.homodyne_scan(state, 100.0, G)
    with pytest.raises(ConfigError, match="order"):
        tg.quadrature_from_scan(scan, order=4)


def test_analytic_marginals_normalized():
    state = fs.make_squeezed(0.0, 0.6, 0.0, cutoff=50)
    x = np.linspace(-5, 5, 201)
    mars = tg.analytic_marginals(state, np.linspace(0, np.pi, 6,
                                                    endpoint=False), x)
    dx = x[1] - x[0]
    for m in mars:
        # tiny mass of the anti-squeezed quadrature lies outside the grid
        assert abs(np.sum(m.density) * dx - 1.0) < 1e-6


def test_inverse_radon_vacuum():
    state = fs.make_fock(0, 10)
    x = np.linspace(-5, 5, 201)
    thetas = np.linspace(0, np.pi, 40, endpoint=False)
    W = tg.inverse_radon(tg.analytic_marginals(state, thetas, x))
    Wt = fs.wigner(state, x, x)
    assert np.max(np.abs(W.values - Wt.values)) / Wt.values.max() < 0.02
    assert abs(W.integral() - 1.0) < 0.01


def test_inverse_radon_needs_angles():
    state = fs.make_fock(0, 10)
    x = np.linspace(-4, 4, 101)
    mars = tg.analytic_marginals(state, np.linspace(0, np.pi, 5,
                                                    endpoint=False), x)
    with pytest.raises(ConfigError, match="angle"):
        tg.inverse_radon(mars)


def test_wigner_csv_schema():
    state = fs.make_fock(0, 8)
    ax = np.linspace(-2, 2, 11)
    W = fs.wigner(state, ax, ax)
    text = tg.wigner_to_csv(W)
    lines = text.splitlines()
    assert lines[0] == "x,p,w"
    assert len(lines) == 1 + 11 * 11


def test_coherence_endpoints():
    taus = np.array([0.0, 1e6])
    for source, want0 in (("coherent", 1.0), ("thermal", 2.0)):
        res = tg.coherence_scan(source, 100.0, 0.1, G, taus,
                                with_spectra=False)
        assert abs(res.g2_mod[0] - want0) < 1e-6
        assert abs(res.g2_mod[1] - 2.0 * (1.0 - 1.0 / 100.0)) < 1e-6


def test_coherence_frozen_values():
    taus = np.array([0.0, 5.0])
    res = tg.coherence_scan("thermal", 100.0, 0.1, G, taus, with_spectra=False)
    assert abs(res.g2_mod[1] - 1.9987516250650494) < 1e-10
    res = tg.coherence_scan("coherent", 100.0, 0.1, G, taus, with_spectra=False)
    assert abs(res.g2_mod[1] - 1.2199508419936445) < 1e-10


def test_coherence_first_order_gaussian():
    bw = 0.07
    taus = np.linspace(0, 30, 7)
    res = tg.coherence_scan("thermal", 50.0, bw, G, taus, with_spectra=False)
    ref = np.exp(-((bw * taus) ** 2) / 2.0)
    assert np.max(np.abs(res.g1_mod - ref)) < 1e-12


def test_coherence_csv_and_map(tmp_path):
    taus = np.linspace(0, 10, 3)
    res = tg.coherence_scan("thermal", 20.0, 0.1, G, taus, with_spectra=True)
    text = res.to_csv()
    assert text.splitlines()[0] == "tau,g1_mod,g2_mod"
    mp = tg.coherence_map_csv(res)
    assert mp.splitlines()[0] == "tau,k,probability"


def test_coherence_invalid_inputs():
    with pytest.raises(ConfigError):
        tg.coherence_scan("laser", 10.0, 0.1, G, np.array([0.0]))
    with pytest.raises(ConfigError):
        tg.coherence_scan("thermal", 10.0, 0.9, G, np.array([0.0]))
