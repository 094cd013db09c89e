"""Command-line front end.

Every subcommand resolves its configuration as flags > config file >
defaults, writes its data files plus a manifest.json with the fully
resolved parameters, and is deterministic given (config, seed): repeated
runs produce byte-identical data files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, fockspace, interaction, oracle, reconstruction
from . import tomography, experiment
from .errors import ConfigError, NumericsError
from .interaction import Coupling


def _out_dir(ns):
    d = ns.out_dir or os.environ.get("QPINEM_OUT_DIR") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _manifest(ns, out_dir, extra=None):
    cfg = {k: v for k, v in sorted(vars(ns).items())
           if k not in ("func", "config") and not k.startswith("_")}
    doc = {"version": __version__, "resolved_config": cfg}
    if extra:
        doc.update(extra)
    import datetime
    doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(doc, f, indent=1, default=str)


def _apply_config_file(ns, parser_defaults):
    """flags > config file > defaults; the config file is one JSON object
    keyed by destination name (optionally under the subcommand name)."""
    if not ns.config:
        return ns
    try:
        with open(ns.config) as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}")
    if ns.command in doc and isinstance(doc[ns.command], dict):
        doc = {**{k: v for k, v in doc.items() if not isinstance(v, dict)},
               **doc[ns.command]}
    for key, val in doc.items():
        key = key.replace("-", "_")
        if not hasattr(ns, key):
            continue
        # a flag explicitly given on the command line wins
        if getattr(ns, key) == parser_defaults.get(key):
            setattr(ns, key, val)
    return ns


# ---------------------------------------------------------------------------
# state construction shared by subcommands

STATE_FAMILIES = ("coherent", "fock", "thermal", "squeezed",
                  "squeezed_vacuum", "cat", "mixed_pair")
DIAG_THRESHOLD = 200.0   # above this mean, diagonal-only fast path


def add_state_args(p):
    p.add_argument("--state", choices=STATE_FAMILIES, default="coherent")
    p.add_argument("--mean-n", type=float, default=None,
                   help="mean photon number (coherent/thermal/squeezed_vacuum)")
    p.add_argument("--n", type=int, default=None, help="Fock index")
    p.add_argument("--alpha", type=complex, default=None,
                   help="complex amplitude, e.g. '2+1j'")
    p.add_argument("--r", type=float, default=0.0, help="squeezing parameter")
    p.add_argument("--phi", type=float, default=0.0, help="squeezing angle")
    p.add_argument("--parity", type=int, default=1, choices=(1, -1))
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--diagonal", action="store_true",
                   help="force the diagonal-statistics fast path")


def build_state(ns, need_matrix=False):
    fam = ns.state
    if fam == "fock":
        if ns.n is None:
            raise ConfigError("--state fock needs --n")
        if ns.diagonal and not need_matrix:
            return fockspace.fock_statistics(ns.n, (ns.cutoff or ns.n + 1))
        return fockspace.make_fock(ns.n, ns.cutoff or ns.n + 8)
    if fam == "coherent":
        if ns.alpha is not None:
            alpha = ns.alpha
        elif ns.mean_n is not None:
            alpha = np.sqrt(ns.mean_n)
        else:
            raise ConfigError("--state coherent needs --alpha or --mean-n")
        mean = abs(alpha) ** 2
        if not need_matrix and (ns.diagonal or mean > DIAG_THRESHOLD):
            return fockspace.coherent_statistics(mean, ns.cutoff)
        return fockspace.make_coherent(alpha, ns.cutoff)
    if fam == "thermal":
        if ns.mean_n is None:
            raise ConfigError("--state thermal needs --mean-n")
        if not need_matrix and (ns.diagonal or ns.mean_n > DIAG_THRESHOLD):
            return fockspace.thermal_statistics(ns.mean_n, ns.cutoff)
        return fockspace.make_thermal(ns.mean_n, ns.cutoff)
    if fam == "squeezed_vacuum":
        if ns.mean_n is None:
            raise ConfigError("--state squeezed_vacuum needs --mean-n")
        if not need_matrix and (ns.diagonal or ns.mean_n > DIAG_THRESHOLD):
            return fockspace.squeezed_vacuum_statistics(ns.mean_n, ns.cutoff)
        r = float(np.arcsinh(np.sqrt(ns.mean_n)))
        return fockspace.make_squeezed(0.0, r, 0.0, ns.cutoff)
    if fam == "squeezed":
        return fockspace.make_squeezed(ns.alpha or 0.0, ns.r, ns.phi, ns.cutoff)
    if fam == "cat":
        if ns.alpha is None:
            raise ConfigError("--state cat needs --alpha")
        return fockspace.make_cat(ns.alpha, ns.parity, ns.cutoff)
    if fam == "mixed_pair":
        if ns.alpha is None:
            raise ConfigError("--state mixed_pair needs --alpha")
        return fockspace.make_mixed_pair(ns.alpha, ns.cutoff)
    raise ConfigError(f"unknown state family {fam}")


def _coupling(ns):
    if ns.g is None or ns.g <= 0:
        raise ConfigError("--g must be a positive coupling magnitude")
    return Coupling(ns.g, getattr(ns, "g_phase", 0.0))


def _svg_line(xs, ys, path, width=640, height=360):
    """Minimal self-contained SVG polyline plot."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    x0, x1 = xs.min(), xs.max()
    y0, y1 = min(ys.min(), 0.0), ys.max()
    if x1 == x0 or y1 == y0:
        x1, y1 = x0 + 1, y0 + 1
    pad = 30
    px = pad + (xs - x0) / (x1 - x0) * (width - 2 * pad)
    py = height - pad - (ys - y0) / (y1 - y0) * (height - 2 * pad)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}"><rect width="100%" height="100%" fill="white"/>'
           f'<polyline points="{pts}" fill="none" stroke="#1f5fa8" '
           f'stroke-width="1.5"/></svg>\n')
    _write(path, svg)


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(ns):
    out = _out_dir(ns)
    g = _coupling(ns)
    engine = ns.engine
    state = build_state(ns, need_matrix=(engine == "oracle" and False))
    if engine == "exact":
        res = interaction.spectrum_exact(state, g, ns.k_range)
        spec = res.spectrum
    elif engine == "approx":
        spec = interaction.spectrum_approx(
            state if isinstance(state, fockspace.PhotonStatistics)
            else fockspace.statistics(state), g, ns.k_range)
    elif engine == "oracle":
        if ns.k_range is None:
            mean = (state.mean_n if hasattr(state, "mean_n") else 0.0)
            ns.k_range = interaction.default_k_half_width(g.beta(mean))
        spec = oracle.oracle_spectrum(state, g, int(ns.k_range)).spectrum
    elif engine == "closed":
        fam = ns.state
        params = ({"n": ns.n} if fam == "fock"
                  else {"mean_n": ns.mean_n if ns.mean_n is not None
                        else abs(ns.alpha) ** 2})
        spec = interaction.spectrum_closed_form(fam, params, g, ns.k_range)
    else:
        raise ConfigError(f"unknown engine {engine}")
    _write(os.path.join(out, "spectrum.csv"), spec.to_csv())
    with open(os.path.join(out, "spectrum.json"), "w") as f:
        json.dump(spec.to_dict(), f)
    if ns.svg:
        _svg_line(spec.ks, spec.probs, os.path.join(out, "spectrum.svg"))
    if ns.sweep_mean:
        lo, hi, num = (float(x) for x in ns.sweep_mean.split(","))
        means = np.linspace(lo, hi, int(num))
        lines = ["mean_n,k,probability"]
        for m in means:
            stats = {"coherent": fockspace.coherent_statistics,
                     "thermal": fockspace.thermal_statistics,
                     "squeezed_vacuum": fockspace.squeezed_vacuum_statistics}[
                         ns.state](m)
            sp = interaction.spectrum_approx(stats, g, ns.k_range)
            for k, p in zip(sp.ks, sp.probs):
                lines.append(f"{float(m)!r},{k},{float(p)!r}")
        _write(os.path.join(out, "spectrum_map.csv"), "\n".join(lines) + "\n")
    _manifest(ns, out)
    return 0


def cmd_reconstruct(ns):
    out = _out_dir(ns)
    g = _coupling(ns)
    if ns.spectrum_file:
        try:
            spec = interaction.load_spectrum_csv(ns.spectrum_file,
                                                 g_magnitude=ns.g)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return 4
    else:
        state = build_state(ns)
        stats = (state if isinstance(state, fockspace.PhotonStatistics)
                 else fockspace.statistics(state))
        spec = interaction.spectrum_approx(stats, g)
    kernel = reconstruction.build_kernel(g, ns.order, spec.k_max)
    mv = reconstruction.moments_from_spectrum(spec, kernel)
    with open(os.path.join(out, "moments.json"), "w") as f:
        json.dump(reconstruction.moments_to_dict(mv, kernel), f)
    if ns.support:
        lo, hi, step = (float(x) for x in ns.support.split(","))
        grid = np.arange(lo, hi + step / 2, step)
        stats_rec = reconstruction.statistics_from_spectrum(spec, g, grid)
        lines = ["n,p"]
        for nval, p in zip(grid, stats_rec.probs):
            lines.append(f"{float(nval)!r},{float(p)!r}")
        _write(os.path.join(out, "statistics.csv"), "\n".join(lines) + "\n")
    _manifest(ns, out)
    return 0


def cmd_tomography(ns):
    out = _out_dir(ns)
    g = _coupling(ns)
    state = build_state(ns, need_matrix=True)
    thetas = np.linspace(0.0, np.pi, ns.angles, endpoint=False)
    scan = tomography.homodyne_scan(state, ns.lo_ratio, g, thetas,
                                    engine=ns.engine)
    _write(os.path.join(out, "scan.csv"), scan.to_csv())
    summary = {"state": state.label}
    if ns.engine == "approx":
        dists = tomography.quadrature_from_scan(scan)
        lines = ["theta,mean,variance"]
        for d in dists:
            lines.append(f"{float(d.theta)!r},{float(d.mean)!r},{float(d.variance)!r}")
        _write(os.path.join(out, "quadratures.csv"), "\n".join(lines) + "\n")
        summary["max_abs_mean_error"] = float(max(
            abs(d.mean - fockspace.quadrature_mean(state, d.theta))
            for d in dists))
        summary["max_rel_variance_error"] = float(max(
            abs(d.variance - fockspace.quadrature_variance(state, d.theta))
            / fockspace.quadrature_variance(state, d.theta) for d in dists))
    if ns.wigner:
        xg = np.linspace(-ns.x_half, ns.x_half, ns.x_points)
        mars = tomography.analytic_marginals(state, thetas, xg)
        W = tomography.inverse_radon(mars)
        _write(os.path.join(out, "wigner.csv"), tomography.wigner_to_csv(W))
        Wt = fockspace.wigner(state, xg, xg)
        peak = float(np.abs(Wt.values).max())
        summary["wigner_linf_over_peak"] = float(
            np.max(np.abs(W.values - Wt.values)) / peak)
        summary["wigner_integral"] = W.integral()
        with open(os.path.join(out, "wigner_meta.json"), "w") as f:
            json.dump({"x_min": float(xg[0]), "x_max": float(xg[-1]),
                       "points": int(ns.x_points), "angles": int(ns.angles)}, f)
    with open(os.path.join(out, "summary.json"), "w") as f:
        json.dump(summary, f)
    _manifest(ns, out)
    return 0


def cmd_hbt(ns):
    out = _out_dir(ns)
    g = _coupling(ns)
    taus = np.linspace(0.0, ns.tau_max, ns.tau_points)
    res = tomography.coherence_scan(ns.source, ns.mean_n, ns.bandwidth, g,
                                    taus, with_spectra=not ns.no_map)
    _write(os.path.join(out, "coherence.csv"), res.to_csv())
    if res.spectra is not None:
        _write(os.path.join(out, "coherence_map.csv"),
               tomography.coherence_map_csv(res))
    if ns.svg:
        _svg_line(res.taus, res.g2_mod, os.path.join(out, "g2.svg"))
    _manifest(ns, out)
    return 0


def cmd_experiment(ns):
    out = _out_dir(ns)
    g = _coupling(ns)
    state = build_state(ns)
    stats = (state if isinstance(state, fockspace.PhotonStatistics)
             else fockspace.statistics(state))
    cfg = experiment.ExperimentConfig(electrons=ns.electrons,
                                      realizations=ns.realizations,
                                      g=g, seed=ns.seed)
    report = {}
    if ns.mode == "precision":
        grid = tuple(int(x) for x in ns.n_grid.split(","))
        rep = experiment.precision_curve(stats, g, cfg, ns.order, grid)
        _write(os.path.join(out, "precision.csv"), rep.to_csv())
        report["slope_m1"] = rep.slope(1)
        report["failures"] = rep.failures
    elif ns.mode == "jitter":
        jg = np.linspace(-ns.jitter, ns.jitter, 11)
        rep = experiment.jitter_sensitivity(stats, g, jg, ns.order)
        _write(os.path.join(out, "jitter.csv"), rep.to_csv())
        report["slopes"] = rep.slopes.tolist()
    elif ns.mode == "budget":
        rep = experiment.single_shot_budget(stats, g, ns.target, ns.order)
        report.update(rep.to_dict())
    else:
        raise ConfigError(f"unknown experiment mode {ns.mode}")
    with open(os.path.join(out, "report.json"), "w") as f:
        json.dump(report, f)
    _manifest(ns, out)
    return 0


# ---------------------------------------------------------------------------

def make_parser():
    ap = argparse.ArgumentParser(
        prog="qpinem",
        description="Electron spectra of quantum light and their inversion")
    ap.add_argument("--out-dir", default=None,
                    help="output directory (or QPINEM_OUT_DIR)")
    ap.add_argument("--config", default=None, help="JSON config file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="electron energy spectrum")
    add_state_args(p)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--g-phase", type=float, default=0.0)
    p.add_argument("--engine", choices=("exact", "approx", "oracle", "closed"),
                   default="exact")
    p.add_argument("--k-range", type=int, default=None)
    p.add_argument("--sweep-mean", default=None,
                   help="'start,stop,num' mean-photon sweep map")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("reconstruct", help="moments / statistics from a spectrum")
    add_state_args(p)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--spectrum-file", default=None)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--support", default=None, help="'min,max,step' n grid")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("tomography", help="homodyne scan / Wigner recovery")
    add_state_args(p)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--lo-ratio", type=float, default=100.0)
    p.add_argument("--angles", type=int, default=40)
    p.add_argument("--engine", choices=("approx", "amplitude"), default="approx")
    p.add_argument("--wigner", action="store_true")
    p.add_argument("--x-half", type=float, default=5.0)
    p.add_argument("--x-points", type=int, default=201)
    p.set_defaults(func=cmd_tomography)

    p = sub.add_parser("hbt", help="delayed-pair coherence measurement")
    p.add_argument("--source", choices=("coherent", "thermal"), default="thermal")
    p.add_argument("--mean-n", type=float, default=100.0)
    p.add_argument("--bandwidth", type=float, default=0.1)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--tau-max", type=float, default=60.0)
    p.add_argument("--tau-points", type=int, default=61)
    p.add_argument("--no-map", action="store_true")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_hbt)

    p = sub.add_parser("experiment", help="Monte-Carlo precision / jitter / budget")
    add_state_args(p)
    p.add_argument("--g", type=float, default=0.1)
    p.add_argument("--mode", choices=("precision", "jitter", "budget"),
                   default="precision")
    p.add_argument("--electrons", type=int, default=1000)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--n-grid", default="100,1000,10000,100000")
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--target", type=float, default=0.05)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    ap = make_parser()
    ns = ap.parse_args(argv)
    defaults = {a.dest: a.default for g in [ap] + list(ap._subparsers._group_actions[0].choices.values())
                for a in g._actions if hasattr(a, "dest")}
    try:
        ns = _apply_config_file(ns, defaults)
        return ns.func(ns)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericsError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
