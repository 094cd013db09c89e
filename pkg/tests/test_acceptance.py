"""Acceptance gate: one test per acceptance criterion, each printing a
single PASS/FAIL line with its headline metric (run with -s to see them
inline; captured output is shown on failure)."""

import json
import time

import numpy as np
import mpmath as mp
from scipy.special import jv

from qpinem import fockspace as fs, interaction as it, oracle
from qpinem import reconstruction as rc, tomography as tg, experiment as ex
from qpinem.cli import main as cli_main
from qpinem.interaction import Coupling


def report(num, label, ok, detail):
    print(f"criterion {num:>2} ({label}): {'PASS' if ok else 'FAIL'} [{detail}]")
    assert ok, f"criterion {num} ({label}) failed: {detail}"


def _padded_squeezed_stats(r, n_keep, n_pad):
    base = fs.squeezed_vacuum_statistics(float(np.sinh(r) ** 2),
                                         n_max=n_keep, tail_tol=1e-5)
    probs = np.zeros(n_pad)
    probs[:len(base.probs)] = base.probs
    return fs.PhotonStatistics(probs / probs.sum(), "squeezed-vacuum")


def test_criterion_01_oracle_equivalence():
    t0 = time.perf_counter()
    states = [("vacuum", fs.fock_statistics(0, 60)),
              ("fock3", fs.fock_statistics(3, 60)),
              ("coherent3", fs.make_coherent(3.0, cutoff=60)),
              ("thermal2", fs.thermal_statistics(2.0, n_max=60,
                                                 tail_tol=1e-7)),
              ("squeezed_r1", _padded_squeezed_stats(1.0, 44, 60))]
    worst = 0.0
    for gmag in (0.1, 0.3, 0.5, 1.0):
        g = Coupling(gmag, 0.0)
        for name, st in states:
            spec = it.spectrum_exact(st, g).spectrum
            mean = getattr(st, "mean_n", 0.0)
            h = max(14, it.default_k_half_width(g.beta(mean)))
            ref = oracle.oracle_spectrum(st, g, h, leak_tol=5e-9).spectrum
            d = max(abs(spec.prob(k) - ref.prob(k))
                    for k in range(ref.k_min + 2, ref.k_max - 1))
            worst = max(worst, d)
    dt = time.perf_counter() - t0
    report(1, "oracle equivalence",
           worst < 1e-8 and dt < 60.0,
           f"max|dP|={worst:.2e}, runtime={dt:.1f}s")


def test_criterion_02_approximation_regime():
    errs = {}
    for gmag in (0.1, 0.5):
        mean = (3.0 / gmag) ** 2          # fixed beta = 3
        stats = fs.coherent_statistics(mean)
        g = Coupling(gmag, 0.0)
        exact = it.spectrum_exact(stats, g).spectrum
        approx = it.spectrum_approx(stats, g, (exact.k_min, exact.k_max))
        errs[gmag] = max(abs(approx.prob(k) - exact.prob(k))
                         for k in range(exact.k_min, exact.k_max + 1))
    ok = errs[0.1] < 1e-3 and errs[0.5] >= 10.0 * errs[0.1]
    report(2, "approximation regime", ok,
           f"err(0.1)={errs[0.1]:.2e}, err(0.5)={errs[0.5]:.2e}, "
           f"ratio={errs[0.5] / errs[0.1]:.1f}")


def test_criterion_03_closed_forms():
    g = Coupling(0.3, 0.0)
    # Fock: closed form is the single-term Bessel expression
    cf = it.spectrum_closed_form("fock", {"n": 3}, g)
    ap = it.spectrum_approx(fs.fock_statistics(3, 8), g, (cf.k_min, cf.k_max))
    d_fock = max(abs(cf.prob(k) - ap.prob(k)) for k in range(-8, 9))
    # thermal: exact for the continuum energy density (numerical quadrature)
    nb = 2.0
    cf = it.spectrum_closed_form("thermal", {"mean_n": nb}, g)
    d_th = 0.0
    for k in range(0, 8):
        val = mp.quad(lambda n: mp.e ** (-n / nb) / nb
                      * mp.besselj(k, 2 * 0.3 * mp.sqrt(n)) ** 2,
                      [0, 20 * nb, 60 * nb])
        d_th = max(d_th, abs(cf.prob(k) - float(val)))
    # squeezed vacuum: continuum density with the sqrt singularity removed
    nb = float(np.sinh(1.0) ** 2)
    g1 = Coupling(0.1, 0.0)
    cf = it.spectrum_closed_form("squeezed_vacuum", {"mean_n": nb}, g1)
    d_sq = 0.0
    for k in range(0, 6):
        val = mp.quad(lambda u: 2 * mp.e ** (-u * u / (2 * nb))
                      / mp.sqrt(2 * mp.pi * nb)
                      * mp.besselj(k, 2 * 0.1 * u) ** 2,
                      [0, 10 * np.sqrt(nb), 40 * np.sqrt(nb)])
        d_sq = max(d_sq, abs(cf.prob(k) - float(val)))
    # coherent with the F/<n> correction at <n> = 1000
    cf = it.spectrum_closed_form("coherent", {"mean_n": 1000.0}, g1)
    ap = it.spectrum_approx(fs.coherent_statistics(1000.0), g1,
                            (cf.k_min, cf.k_max))
    d_coh = max(abs(cf.prob(k) - ap.prob(k))
                for k in range(cf.k_min, cf.k_max + 1))
    ok = d_fock < 1e-10 and d_th < 1e-10 and d_sq < 1e-6 and d_coh < 1e-5
    report(3, "closed forms", ok,
           f"fock={d_fock:.1e}, thermal={d_th:.1e}, squeezed={d_sq:.1e}, "
           f"coherent={d_coh:.1e}")


def test_criterion_04_kernel_identity():
    g = 0.1
    K = rc.build_kernel(Coupling(g, 0.0), 6, 12)
    ident = rc.kernel_identity_error(K)
    K6 = rc.build_kernel(Coupling(g, 0.0), 6, 6)
    c, d = K6.c[1:, 1:], K6.d[1:, 1:]
    D = np.diag(g ** (2.0 * np.arange(1, 7)))
    dref = np.linalg.inv(D) @ np.linalg.pinv(c @ np.linalg.inv(D))
    mask = np.triu(np.ones((6, 6), bool))
    pinv_err = (np.abs(d - dref) / np.abs(dref))[mask].max()
    ok = ident < 1e-8 and pinv_err < 1e-6
    report(4, "kernel identity", ok,
           f"|dc-I|={ident:.1e}, pinv rel={pinv_err:.1e}")


def test_criterion_05_inversion_roundtrip():
    g = Coupling(0.1, 0.0)
    worst = 0.0
    for stats in (fs.coherent_statistics(900.0),
                  fs.thermal_statistics(1000.0),
                  fs.squeezed_vacuum_statistics(1000.0)):
        spec = it.spectrum_approx(stats, g)
        K = rc.build_kernel(g, 3, spec.k_max)
        mv = rc.moments_from_spectrum(spec, K)
        truth = fs.moments(stats, 3)
        for m in (1, 2, 3):
            worst = max(worst, abs(mv[m] / truth[m] - 1.0))
    report(5, "inversion roundtrip", worst < 1e-4,
           f"max rel err={worst:.2e}")


def test_criterion_06_monte_carlo_precision():
    t0 = time.perf_counter()
    stats = fs.coherent_statistics(900.0)          # alpha = 30
    g = Coupling(0.1, 0.0)
    cfg = ex.ExperimentConfig(electrons=1000, realizations=100, g=g, seed=0)
    rep = ex.precision_curve(stats, g, cfg, order=1,
                             n_grid=(100, 1000, 10000, 100000))
    anchor = rep.rel_errors[list(rep.n_values).index(1000.0), 0]
    slope = rep.slope(1)
    dt = time.perf_counter() - t0
    ok = 0.03 <= anchor <= 0.08 and -0.6 <= slope <= -0.4 and dt < 60.0
    report(6, "Monte-Carlo precision", ok,
           f"rel dev(N=1000)={anchor:.3f}, slope={slope:.3f}, "
           f"runtime={dt:.1f}s")


def test_criterion_07_jitter_law():
    stats = fs.coherent_statistics(400.0)
    rep = ex.jitter_sensitivity(stats, Coupling(0.1, 0.0),
                                np.linspace(-0.05, 0.05, 11), order=3)
    ok = all(1.8 * m <= abs(rep.slopes[m - 1]) <= 2.2 * m for m in (1, 2, 3))
    report(7, "jitter law", ok,
           "slopes=" + ", ".join(f"{s:.2f}" for s in rep.slopes))


def test_criterion_08_back_action():
    # (a) approximate-regime trace-out is the identity on p_n
    stats = fs.coherent_statistics(25.0)
    n = np.arange(len(stats.probs))
    ks = np.arange(-60, 61)
    joint = stats.probs[None, :] * jv(ks[:, None],
                                      2 * 0.1 * np.sqrt(n)[None, :]) ** 2
    dev_a = np.max(np.abs(joint.sum(axis=0) - stats.probs))
    # (b) exact single-electron drift, small and monotone in |g|
    coh5 = fs.statistics(fs.make_coherent(5.0))
    devs_g = []
    for gmag in (0.01, 0.02, 0.035, 0.05):
        _, d = it.traced_back_action(coh5, Coupling(gmag, 0.0), 1)
        devs_g.append(d[0])
    ok_b = devs_g[-1] < 0.01 and np.all(np.diff(devs_g) > 0)
    # (c) quadrature-variance growth N_e |g|^2 / 2 against exact evolution
    state = fs.make_coherent(1.0, cutoff=40)
    dev_c = 0.0
    for ne in range(1, 6):
        analytic, numeric = it.quadrature_growth(state, Coupling(0.05, 0.0), ne)
        dev_c = max(dev_c, abs(numeric - analytic))
    # (d) sublinear accumulation of the statistics drift
    _, d8 = it.traced_back_action(coh5, Coupling(0.05, 0.0), 8)
    ok_d = d8[3] < 2 * d8[1] and d8[7] < 2 * d8[3]
    ok = dev_a < 1e-12 and ok_b and dev_c < 1e-4 and ok_d
    report(8, "back-action", ok,
           f"approx dev={dev_a:.1e}, exact dev(g=0.05)={devs_g[-1]:.2e}, "
           f"quad growth dev={dev_c:.1e}, sublinear={ok_d}")


def test_criterion_09_tomography():
    G = Coupling(0.1, 0.0)
    x = np.linspace(-5, 5, 201)
    thetas = np.linspace(0, np.pi, 40, endpoint=False)
    # (a) filtered back-projection of analytic marginals
    fbp = {}
    for name, st in [("vacuum", fs.make_fock(0, 10)),
                     ("coherent", fs.make_coherent(1.5 + 0.5j)),
                     ("squeezed", fs.make_squeezed(0.0, 1.0, 0.0, cutoff=90))]:
        W = tg.inverse_radon(tg.analytic_marginals(st, thetas, x))
        Wt = fs.wigner(st, x, x)
        fbp[name] = np.max(np.abs(W.values - Wt.values)) / np.abs(Wt.values).max()
    ok_a = all(v < 0.05 for v in fbp.values())
    # (b) electron-pipeline quadrature moments for Gaussian states
    worst_m = 0.0
    for st in (fs.make_coherent(1.0 + 0.6j),
               fs.make_squeezed(0.0, 0.8, 0.0, cutoff=70)):
        scan = tg.homodyne_scan(st, 100.0, G,
                                np.linspace(0, np.pi, 12, endpoint=False))
        for d in tg.quadrature_from_scan(scan):
            m1 = fs.quadrature_mean(st, d.theta)
            m2 = fs.quadrature_variance(st, d.theta) + m1 ** 2
            worst_m = max(worst_m, abs((d.variance + d.mean ** 2) / m2 - 1.0),
                          abs(d.mean - m1) / max(abs(m1), 0.5))
    ok_b = worst_m < 0.01
    # (c) cat-minus-mixed scan difference map above the numerical floor
    cat_scan = tg.homodyne_scan(fs.make_cat(2.0, +1), 100.0, G, thetas)
    mix_scan = tg.homodyne_scan(fs.make_mixed_pair(2.0), 100.0, G, thetas)
    spectra = cat_scan.spectra + mix_scan.spectra
    kmin = max(s.k_min for s in spectra) + 0
    kmax = min(s.k_max for s in spectra)
    diff = max(abs(a.prob(k) - b.prob(k))
               for a, b in zip(cat_scan.spectra, mix_scan.spectra)
               for k in range(kmin, kmax + 1))
    noise = max(max(s.prob(s.k_min), s.prob(s.k_max), s.leakage)
                for s in spectra)
    ok_c = diff > 10.0 * noise
    report(9, "tomography", ok_a and ok_b and ok_c,
           f"FBP Linf/peak={max(fbp.values()):.3f}, "
           f"moments={worst_m:.1e}, cat diff={diff:.1e} vs noise={noise:.1e}")


def test_criterion_10_coherence():
    G = Coupling(0.1, 0.0)
    nbar = 100.0
    taus = np.linspace(0.0, 60.0, 25)
    res = {}
    for src in ("coherent", "thermal"):
        res[src] = tg.coherence_scan(src, nbar, 0.1, G, taus,
                                     with_spectra=False)
    asym = 2.0 * (1.0 - 1.0 / nbar)
    far = tg.coherence_scan("coherent", nbar, 0.1, G, np.array([1e6]),
                            with_spectra=False).g2_mod[0]
    far_th = tg.coherence_scan("thermal", nbar, 0.1, G, np.array([1e6]),
                               with_spectra=False).g2_mod[0]
    e0c = abs(res["coherent"].g2_mod[0] - 1.0)
    e0t = abs(res["thermal"].g2_mod[0] - 2.0)
    einf = max(abs(far - asym), abs(far_th - asym))
    dips = res["coherent"].g2_mod.min() < asym - 0.01
    tv = {s: float(np.sum(np.abs(np.diff(res[s].g2_mod)))) for s in res}
    ok = (e0c < 1e-6 and e0t < 1e-6 and einf < 1e-6 and dips
          and tv["thermal"] * 5.0 <= tv["coherent"])
    report(10, "coherence", ok,
           f"g2(0) errs=({e0c:.1e},{e0t:.1e}), g2(inf) err={einf:.1e}, "
           f"dips={dips}, TV ratio={tv['coherent'] / tv['thermal']:.1f}")


def test_criterion_11_cli_determinism(tmp_path):
    args = ["experiment", "--mode", "precision", "--state", "coherent",
            "--mean-n", "400", "--g", "0.1", "--n-grid", "100,1000",
            "--realizations", "10", "--seed", "11"]
    spec_args = ["spectrum", "--state", "thermal", "--mean-n", "3",
                 "--g", "0.2", "--engine", "exact"]
    pairs = []
    for tag, argv in (("exp", args), ("spec", spec_args)):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{tag}{rep}"
            assert cli_main(["--out-dir", str(d), *argv]) == 0
            outs.append(d)
        for f in sorted(outs[0].iterdir()):
            if f.name == "manifest.json":
                continue                      # carries a timestamp
            same = f.read_bytes() == (outs[1] / f.name).read_bytes()
            pairs.append((f.name, same))
    ok = all(same for _, same in pairs)
    report(11, "CLI determinism", ok,
           f"{sum(s for _, s in pairs)}/{len(pairs)} files byte-identical")
