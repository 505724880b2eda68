"""Command-line surface: config parsing, run persistence, experiment suites.

Config files are strict key=value text (one pair per line, '#' comments);
unknown keys are fatal so that a run manifest fully determines the
experiment.  Every command writes into a directory keyed by the manifest
hash and writes manifest.json last as the commit marker.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    EnsembleRun,
    cole_hopf_reference,
    dissipation_report,
    feller_probe,
    moment_report,
    run_ensemble,
    tail_report,
)
from .ergodic import bootstrap_baseline, invariance_check, kb_average, measure_distance, tightness_report
from .grid import Field, Grid, make_grid
from .integrator import SimConfig, Trajectory, simulate
from .noise import NoiseModel, SigmaSpec, sample_path, trajectory_stream
from .picard import contraction_factor, heat_flow_path, picard_solve
from .semigroup import kernel_checks

SNAPSHOT_MAGIC = b"SBURG001"

DEFAULTS = {
    "L": 32.0,
    "n": 2047,
    "dt": 1e-3,
    "T": 50.0,
    "k": 1.0,
    "l": 0.3,
    "sigma_kind": "linear",
    "a0": 0.5,
    "r": 1.0,
    "J": 64,
    "M": 200,
    "seed": 20240801,
    "N_max": 8.0,
    "p": 2.0,
    "snapshot_stride": 100,
    "retain_states": False,
}

_PARSERS = {
    "L": float,
    "n": int,
    "dt": float,
    "T": float,
    "k": float,
    "l": float,
    "sigma_kind": str,
    "a0": float,
    "r": float,
    "J": int,
    "M": int,
    "seed": int,
    "N_max": float,
    "p": float,
    "snapshot_stride": int,
    "retain_states": lambda s: {"true": True, "false": False}[s.lower()],
}


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> SimConfig:
    """Strict key=value parsing; unknown keys and bad values are fatal."""
    values = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not val:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
    return build_config(values)


def build_config(values: dict) -> SimConfig:
    grid = make_grid(values["L"], values["n"])
    sigma = SigmaSpec(kind=values["sigma_kind"], l=values["l"])
    noise = NoiseModel.power_law(grid, J=values["J"], a0=values["a0"], r=values["r"])
    return SimConfig(
        grid=grid,
        sigma=sigma,
        noise=noise,
        k=values["k"],
        dt=values["dt"],
        T=values["T"],
        snapshot_stride=values["snapshot_stride"],
        n_max=values["N_max"],
        p=values["p"],
        master_seed=values["seed"],
        m_trajectories=values["M"],
        retain_states=values["retain_states"],
    )


def render_config(cfg: SimConfig) -> str:
    """Inverse of parse_config for every key it understands."""
    a = cfg.noise.a
    a0 = float(a[0])
    r = 0.0 if cfg.noise.J == 1 else float(-np.log(a[1] / a[0]) / np.log(2.0))
    items = {
        "L": cfg.grid.half_width,
        "n": cfg.grid.n,
        "dt": cfg.dt,
        "T": cfg.T,
        "k": cfg.k,
        "l": cfg.sigma.l,
        "sigma_kind": cfg.sigma.kind,
        "a0": a0,
        "r": r,
        "J": cfg.noise.J,
        "M": cfg.m_trajectories,
        "seed": cfg.master_seed,
        "N_max": cfg.n_max,
        "p": cfg.p,
        "snapshot_stride": cfg.snapshot_stride,
        "retain_states": "true" if cfg.retain_states else "false",
    }
    return "\n".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in items.items()) + "\n"


def default_u0(grid: Grid) -> Field:
    """Unit-amplitude Gaussian bump, the reference initial datum for all suites."""
    return Field(np.exp(-grid.nodes**2), grid)


def manifest_dict(cfg: SimConfig, command: str, extra: dict | None = None) -> dict:
    d = {
        "tool": "sburg",
        "version": __version__,
        "command": command,
        "config": render_config(cfg),
        "master_seed": cfg.master_seed,
        "derived": {
            "a": cfg.trace,
            "al2": cfg.al2,
            "k_over_p_minus_1": cfg.k / (cfg.p - 1.0),
            "three_sevenths_k": 3.0 * cfg.k / 7.0,
            "bound_regime": cfg.bound_regime,
            "invariant_regime": cfg.invariant_regime,
        },
    }
    if extra:
        d.update(extra)
    return d


def run_directory(base: Path, manifest: dict) -> Path:
    key = json.dumps(
        {"command": manifest["command"], "config": manifest["config"]}, sort_keys=True
    )
    h = hashlib.sha256(key.encode()).hexdigest()[:12]
    out = base / h
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, manifest: dict) -> None:
    # written last: its presence marks a completed run
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_snapshot(path: Path, grid: Grid, t: float, values: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", grid.n))
        fh.write(struct.pack("<d", grid.half_width))
        fh.write(struct.pack("<d", t))
        fh.write(np.asarray(values, dtype="<f8").tobytes())


def read_snapshot(path: Path) -> tuple[Grid, float, np.ndarray]:
    raw = path.read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad snapshot magic {raw[:8]!r}")
    n = struct.unpack("<I", raw[8:12])[0]
    L = struct.unpack("<d", raw[12:20])[0]
    t = struct.unpack("<d", raw[20:28])[0]
    values = np.frombuffer(raw[28:], dtype="<f8")
    if values.size != n:
        raise ValueError(f"{path}: payload size {values.size} != header n {n}")
    return make_grid(L, n), t, values.copy()


TIMESERIES_HEADER = "t,l2sq,lpp,h1sq,tail_N1,tail_N2,c1,c2,c3,c4,c5,c6,c7,c8"


def write_timeseries(path: Path, traj: Trajectory, tail_indices=(1, 3)) -> None:
    """Per-trajectory CSV with the fixed, documented column contract."""
    i1, i2 = tail_indices
    with open(path, "w") as fh:
        fh.write(TIMESERIES_HEADER + "\n")
        for s, t in enumerate(traj.times):
            cells = [t, traj.l2[s] ** 2, traj.lpp[s], traj.h1sq[s],
                     traj.tails[s, i1], traj.tails[s, i2], *traj.coeffs[s]]
            fh.write(",".join(repr(float(c)) for c in cells) + "\n")


def write_ensemble_stats(path: Path, run: EnsembleRun) -> None:
    st = run.stats()
    cols = ["t", "mean_l2sq", "se_l2sq", "mean_lpp", "se_lpp", "mean_h1sq", "se_h1sq"]
    for N in run.cfg.tail_radii:
        cols += [f"mean_tail_{N:g}", f"se_tail_{N:g}"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for s, t in enumerate(st.times):
            cells = [t, st.mean_l2sq[s], st.se_l2sq[s], st.mean_lpp[s], st.se_lpp[s],
                     st.mean_h1sq[s], st.se_h1sq[s]]
            for j in range(len(run.cfg.tail_radii)):
                cells += [st.mean_tails[s, j], st.se_tails[s, j]]
            fh.write(",".join(repr(float(c)) for c in cells) + "\n")


def _load_cfg(path: str) -> SimConfig:
    return parse_config(Path(path).read_text())


def _regime_banner(cfg: SimConfig) -> str:
    return (
        f"a = {cfg.trace:.6g}, a*l^2 = {cfg.al2:.6g}, "
        f"k/(p-1) = {cfg.k / (cfg.p - 1):.6g}, (3/7)k = {3 * cfg.k / 7:.6g}; "
        f"bound_regime={cfg.bound_regime}, invariant_regime={cfg.invariant_regime}"
    )


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    if not cfg.invariant_regime:
        print("warning: a*l^2 >= (3/7)k, outside the invariant-measure regime")
    manifest = manifest_dict(cfg, "simulate")
    out = run_directory(Path(args.out), manifest)
    run = run_ensemble(cfg, default_u0(cfg.grid), workers=args.workers)
    write_ensemble_stats(out / "ensemble_stats.csv", run)
    traj0 = simulate(cfg, default_u0(cfg.grid), trajectory_stream(cfg.master_seed, 0))
    write_timeseries(out / "timeseries.csv", traj0)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    keep = np.linspace(0, traj0.times.size - 1, min(11, traj0.times.size)).astype(int)
    for s in np.unique(keep):
        write_snapshot(
            snap_dir / f"traj000_{s:05d}.bin", cfg.grid, float(traj0.times[s]), traj0.snapshots[s]
        )
    manifest["outputs"] = ["ensemble_stats.csv", "timeseries.csv", "snapshots/"]
    write_manifest(out, manifest)
    print(f"run directory: {out}")
    return 0


def _write_report(out: Path, name: str, report) -> None:
    (out / f"{name}.txt").write_text(report.to_text() + "\n")
    (out / f"{name}.csv").write_text("\n".join(report.to_csv_rows()) + "\n")


def cmd_bounds(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    manifest = manifest_dict(cfg, "bounds")
    out = run_directory(Path(args.out), manifest)
    run = run_ensemble(cfg, default_u0(cfg.grid), workers=args.workers)
    stats = run.stats()
    rep_m = moment_report(stats)
    rep_d = dissipation_report(stats)
    _write_report(out, "moment_report", rep_m)
    _write_report(out, "dissipation_report", rep_d)
    write_ensemble_stats(out / "ensemble_stats.csv", run)
    ok = rep_m.passed and rep_d.passed
    manifest["outputs"] = ["moment_report.txt", "dissipation_report.txt", "ensemble_stats.csv"]
    manifest["passed"] = ok
    write_manifest(out, manifest)
    print(rep_m.to_text())
    print(rep_d.to_text())
    return 0 if ok else 1


def cmd_tail(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    manifest = manifest_dict(cfg, f"tail eps={args.eps}")
    out = run_directory(Path(args.out), manifest)
    run = run_ensemble(cfg, default_u0(cfg.grid), workers=args.workers)
    tr = tail_report(run.stats(), args.eps)
    _write_report(out, "tail_report", tr.report)
    curve_lines = ["N,sup_tail"] + [f"{N!r},{v!r}" for N, v in tr.curve]
    (out / "tail_curve.csv").write_text("\n".join(curve_lines) + "\n")
    manifest["outputs"] = ["tail_report.txt", "tail_curve.csv"]
    manifest["passed"] = tr.report.passed
    write_manifest(out, manifest)
    print(tr.report.to_text())
    return 0 if tr.report.passed else 1


def cmd_picard(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    manifest = manifest_dict(
        cfg, f"picard N={args.N} lambda={args.lam} iters={args.iters}"
    )
    out = run_directory(Path(args.out), manifest)
    steps = int(round(args.t_loc / cfg.dt))
    rng = trajectory_stream(cfg.master_seed, 0)
    noise = sample_path(cfg.noise, cfg.dt, steps, rng)
    u0 = default_u0(cfg.grid)
    _, residuals = picard_solve(u0, cfg, args.N, args.iters, noise, lam=args.lam)
    factors = []
    pair_rng = np.random.default_rng(cfg.master_seed)
    for _ in range(args.pairs):
        u = _random_path(u0, noise, pair_rng)
        v = _random_path(u0, noise, pair_rng)
        factors.append(contraction_factor(u, v, cfg, args.N, args.lam))
    factors = np.asarray(factors)
    frac = float((factors < 1.0).mean())
    lines = ["picard report",
             f"residuals: {', '.join(f'{r:.4g}' for r in residuals)}",
             f"contraction factors over {args.pairs} random pairs at lambda={args.lam}:",
             f"  median={np.median(factors):.4g} max={factors.max():.4g} frac<1={frac:.3f}"]
    (out / "picard_report.txt").write_text("\n".join(lines) + "\n")
    ok = frac >= 0.95 and bool(np.all(np.diff(residuals) < 0))
    manifest["outputs"] = ["picard_report.txt"]
    manifest["passed"] = ok
    write_manifest(out, manifest)
    print("\n".join(lines))
    return 0 if ok else 1


def _random_path(u0: Field, noise, rng) -> "PathFunction":
    """A smooth random perturbation of the heat flow, sharing u0 and the noise."""
    base = heat_flow_path(u0, noise.times, noise)
    grid = u0.grid
    n_modes = 8
    from .spectral import basis_matrix

    B = basis_matrix(grid, n_modes)
    amps = rng.standard_normal((1, n_modes)) / np.arange(1, n_modes + 1)
    envelope = np.sin(np.pi * noise.times / noise.times[-1])[:, None]
    base.values = base.values + envelope * (amps @ B)
    base.values[0] = u0.values
    return base


def cmd_feller(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    manifest = manifest_dict(cfg, f"feller delta={args.delta}")
    out = run_directory(Path(args.out), manifest)
    u01 = default_u0(cfg.grid)
    from .noise import basis_eval

    e1 = basis_eval(1, cfg.grid)
    scales = [2.0**-i for i in range(10)]
    ratios = []
    for c in scales:
        u02 = Field(u01.values + c * 0.1 * e1.values, cfg.grid)
        ratios.append(feller_probe(u01, u02, cfg, args.delta, args.pairs))
    ratios = np.asarray(ratios)
    variation = float(ratios.max() / ratios.min())
    lines = ["feller probe report", "scale,ratio"] + [
        f"{c!r},{r!r}" for c, r in zip(scales, ratios)
    ] + [f"max/min = {variation:.4g}"]
    (out / "feller_report.txt").write_text("\n".join(lines) + "\n")
    ok = variation <= 1.5
    manifest["outputs"] = ["feller_report.txt"]
    manifest["passed"] = ok
    write_manifest(out, manifest)
    print("\n".join(lines))
    return 0 if ok else 1


def cmd_invariant(args) -> int:
    cfg = _load_cfg(args.config)
    print(_regime_banner(cfg))
    if not cfg.invariant_regime:
        print(
            f"refusing: a*l^2 = {cfg.al2:.6g} >= (3/7)k = {3 * cfg.k / 7:.6g}; "
            "the invariant-measure construction requires a*l^2 < (3/7)k",
            file=sys.stderr,
        )
        return 2
    if not cfg.retain_states:
        print("refusing: invariant suite needs retain_states=true", file=sys.stderr)
        return 2
    if cfg.T < 2 * args.s + 1:
        print(f"refusing: horizon T={cfg.T} < 2s+1 = {2 * args.s + 1}", file=sys.stderr)
        return 2
    manifest = manifest_dict(cfg, f"invariant s={args.s} eps={args.eps}")
    out = run_directory(Path(args.out), manifest)
    run = run_ensemble(cfg, default_u0(cfg.grid), workers=args.workers)
    rng = np.random.default_rng(cfg.master_seed)

    s_list = [args.s // 4, args.s // 2, args.s]
    dists = []
    for s in s_list:
        mu_s = kb_average(run, s)
        mu_2s = kb_average(run, 2 * s)
        dists.append((s, measure_distance(mu_s, mu_2s)))
    mu = kb_average(run, args.s)
    m_push = min(args.push_samples, mu.samples.shape[0] // 2)
    dist = invariance_check(mu, cfg, args.delta, m_push, rng)
    baseline = bootstrap_baseline(mu, m_push, reps=20, rng=rng)
    tight = tightness_report(run, args.eps, list(range(1, 7)))

    lines = ["invariant measure report"]
    lines += [f"d(mu_{s}, mu_{2 * s}) = {d:.6g}" for s, d in dists]
    lines += [
        f"invariance: d(mu, p_delta* mu) = {dist:.6g}, bootstrap baseline = {baseline:.6g}",
        tight.to_text(),
    ]
    (out / "invariant_report.txt").write_text("\n".join(lines) + "\n")
    mu_rows = [",".join(["l2sq", "h1sq", "tail_quarter", "tail_half"] + [f"c{j}" for j in range(1, 9)])]
    mu_rows += [",".join(repr(float(v)) for v in row) for row in mu.samples]
    (out / "empirical_measure.csv").write_text("\n".join(mu_rows) + "\n")
    seq = [d for _, d in dists]
    ok = (
        all(b < a for a, b in zip(seq, seq[1:]))
        and dist <= 2.0 * baseline
        and tight.passed
    )
    manifest["outputs"] = ["invariant_report.txt", "empirical_measure.csv"]
    manifest["passed"] = ok
    write_manifest(out, manifest)
    print("\n".join(lines))
    return 0 if ok else 1


def cmd_kernel_check(args) -> int:
    grid = make_grid(args.L, args.n)
    print("t,mass,l2sq,target_l2sq")
    worst = 0.0
    for t in args.times:
        mass, l2sq = kernel_checks(grid, t)
        target = (8.0 * np.pi * t) ** -0.5
        print(f"{t!r},{mass!r},{l2sq!r},{target!r}")
        worst = max(worst, abs(mass - 1.0), abs(l2sq - target) / target)
    return 0 if worst < 1e-4 else 1


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="sburg", description=__doc__)
    ap.add_argument("--out", default="runs", help="base output directory")
    ap.add_argument("--workers", type=int, default=1, help="FFT worker threads")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the ensemble and persist time series")
    p.add_argument("config")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("bounds", help="moment and dissipation reports")
    p.add_argument("config")
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("tail", help="uniform tail estimate report")
    p.add_argument("config")
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(fn=cmd_tail)

    p = sub.add_parser("picard", help="Picard residuals and contraction factors")
    p.add_argument("config")
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--t-loc", dest="t_loc", type=float, default=0.25)
    p.add_argument("--pairs", type=int, default=50)
    p.set_defaults(fn=cmd_picard)

    p = sub.add_parser("feller", help="coupled-pair continuity probe")
    p.add_argument("config")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--pairs", type=int, default=16)
    p.set_defaults(fn=cmd_feller)

    p = sub.add_parser("invariant", help="Krylov-Bogolioubov averaging suite")
    p.add_argument("config")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--push-samples", type=int, default=32)
    p.set_defaults(fn=cmd_invariant)

    p = sub.add_parser("kernel-check", help="heat kernel identities")
    p.add_argument("--L", type=float, default=32.0)
    p.add_argument("--n", type=int, default=2047)
    p.add_argument("--times", type=float, nargs="+", default=[0.1, 1.0, 4.0])
    p.set_defaults(fn=cmd_kernel_check)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
