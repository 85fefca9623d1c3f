"""Command-line front end.

Subcommands: ``fpca``, ``far-predict``, ``ffr``, ``predict``, ``simlab run``.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
All randomness flows from ``--seed``.  Config files are flat ``key=value``
lines with ``#`` comments; any key can be overridden by an environment
variable ``PFP_<KEY>`` (upper-cased).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import simlab
from .far import fit_far, predict_curve, select_order, sliding_residuals
from .ffr import ffpe_joint, fit_ffr, kernel_surface, predict_ffr, select_dims
from .fpca import fpca
from .funkdata import (DiscreteSample, Grid, NumericalError, bspline_basis,
                       fourier_basis, make_grid, nodal_basis, smooth, split_at,
                       trapezoid_weights)
from .model import pfp_fit, pfp_predict, pfp_predict_noisy
from .bootstrap import bootstrap_bands


def _build_basis(kind: str, grid: Grid, dim: int):
    if kind == "fourier":
        return fourier_basis(grid, dim)
    if kind == "bspline":
        return bspline_basis(grid, dim)
    if kind == "nodal":
        return nodal_basis(grid)
    raise ValueError(f"unknown basis kind {kind!r}")


def _load_sample(path: str, grid_path: str | None) -> tuple[Grid, np.ndarray]:
    """Wide CSV: header row, one curve per line; NaN cells allowed (target rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        values = np.genfromtxt(fh, delimiter=",", ndmin=2)
    if grid_path:
        points = np.loadtxt(grid_path).ravel()
        grid = Grid(points, trapezoid_weights(points))
    else:
        try:
            points = np.array([float(c) for c in header])
            grid = Grid(points, trapezoid_weights(points))
        except ValueError:
            grid = make_grid(len(header))
    if values.shape[1] != len(grid):
        raise ValueError(f"{path}: row length {values.shape[1]} does not match "
                         f"grid length {len(grid)}")
    return grid, values


def _write_csv(path: Path, columns, rows) -> None:
    def fmt(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return "%.6f" % float(v)

    lines = [",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fpca(args) -> int:
    grid, values = _load_sample(args.input, args.grid)
    if np.isnan(values).any():
        raise ValueError("input contains missing values")
    basis = _build_basis(args.basis, grid, args.dim)
    series, _ = smooth(DiscreteSample(grid, values), basis)
    es = fpca(series)
    out = _outdir(args)
    ratio = es.explained_variance_ratio()
    _write_csv(out / "eigenvalues.csv", ["component", "eigenvalue", "explained", "cumulative"],
               [[j + 1, es.eigenvalues[j], ratio[j], ratio[: j + 1].sum()]
                for j in range(es.n_components)])
    fun_vals = es.eigenfunction_values()
    _write_csv(out / "eigenfunctions.csv",
               ["t"] + [f"v{j + 1}" for j in range(es.n_components)],
               [[grid.points[i], *fun_vals[i]] for i in range(len(grid))])
    print(f"wrote {out / 'eigenvalues.csv'} and {out / 'eigenfunctions.csv'}")
    return 0


def _cmd_far_predict(args) -> int:
    grid, values = _load_sample(args.input, args.grid)
    if np.isnan(values).any():
        raise ValueError("input contains missing values")
    basis = _build_basis(args.basis, grid, args.dim)
    series, _ = smooth(DiscreteSample(grid, values), basis)
    window = args.window or series.n_curves
    tail = series.take(slice(series.n_curves - window, series.n_curves))
    p, d = args.p, args.d
    if p is None or d is None:
        p, d = select_order(tail, args.p_max, args.d_max)
    model = fit_far(tail, p, d)
    rows = []
    for h in range(1, args.h + 1):
        coeffs = predict_curve(model, tail, h)
        rows.append(basis.evaluate(coeffs).ravel())
    out = _outdir(args)
    _write_csv(out / "far_prediction.csv",
               ["t"] + [f"h{h}" for h in range(1, args.h + 1)],
               [[grid.points[i], *[r[i] for r in rows]] for i in range(len(grid))])
    print(f"selected (p, d) = ({p}, {d}); wrote {out / 'far_prediction.csv'}")
    return 0


def _cmd_ffr(args) -> int:
    grid, values = _load_sample(args.input, args.grid)
    if np.isnan(values).any():
        raise ValueError("input contains missing values")
    basis = _build_basis(args.basis, grid, args.dim)
    series, _ = smooth(DiscreteSample(grid, values), basis)
    x, y = split_at(series, args.tau)
    if args.select or args.dx is None or args.dy is None:
        dx, dy = select_dims(x, y, args.dx_max, args.dy_max)
    else:
        dx, dy = args.dx, args.dy
    model = fit_ffr(x, y, dx, dy)
    out = _outdir(args)
    if args.kernel:
        surf = kernel_surface(model)
        s_pts = model.pred_es.basis.grid.points
        t_pts = model.resp_es.basis.grid.points
        _write_csv(out / "kernel.csv", ["s"] + ["%.6f" % t for t in t_pts],
                   [[s_pts[i], *surf[i]] for i in range(len(s_pts))])
    fitted = predict_ffr(model, x.values())
    _write_csv(out / "ffr_fitted.csv",
               ["t"] + [f"curve{i + 1}" for i in range(fitted.shape[0])],
               [[model.resp_es.basis.grid.points[j], *fitted[:, j]]
                for j in range(fitted.shape[1])])
    print(f"(dx, dy) = ({dx}, {dy}); outputs in {out}")
    return 0


def _cmd_predict(args) -> int:
    grid, values = _load_sample(args.input, args.grid)
    if values.shape[0] < 3:
        raise ValueError("need at least two history curves plus the partial row")
    history_vals, target_row = values[:-1], values[-1]
    if np.isnan(history_vals).any():
        raise ValueError("history rows contain missing values")
    basis = _build_basis(args.basis, grid, args.dim)
    raw_history = DiscreteSample(grid, history_vals)
    series, presmooth = smooth(raw_history, basis)
    window = min(args.window or series.n_curves, series.n_curves)
    tau = args.tau
    n_pred = int(np.sum(grid.points <= tau + 1e-12))
    partial = target_row[:n_pred]
    if np.isnan(partial).any():
        raise ValueError("the partial observation must be complete up to tau")
    targets = np.arange(window, series.n_curves)
    if targets.size < 10:
        raise ValueError("window leaves too few curves for residual training")
    if args.select:
        sel = ffpe_joint(series, tau, range(args.p_max + 1), range(1, args.d_max + 1),
                         range(1, args.dx_max + 1), range(1, args.dy_max + 1), window)
        p, d, dx, dy = sel.p, sel.d, sel.dx, sel.dy
    else:
        p, d = args.p, args.d
        if p is None or d is None:
            p, d = select_order(series.take(slice(0, window)), args.p_max, args.d_max)
        dx, dy = args.dx, args.dy
        if dx is None or dy is None:
            resid = sliding_residuals(series, p, d, window)
            xr, yr = split_at(resid.residuals, tau)
            dx, dy = select_dims(xr, yr, args.dx_max, args.dy_max)
    model = pfp_fit(series, tau, p, d, dx, dy, window,
                    presmooth_residuals=presmooth if args.noisy else None)
    if args.noisy:
        pred = pfp_predict_noisy(model, partial, args.h)
    else:
        pred = pfp_predict(model, partial)
    columns = ["t", "far", "update", "combined"]
    rows = np.column_stack([pred.grid_points, pred.full_curve_part,
                            pred.residual_part, pred.combined])
    if args.bands and not args.noisy:
        bands = bootstrap_bands(model, partial, args.bands, args.alpha,
                                args.var_threshold, seed=args.seed)
        columns += ["lower", "upper"]
        rows = np.column_stack([rows, bands.lower, bands.upper])
    out = _outdir(args)
    _write_csv(out / "prediction.csv", columns, rows.tolist())
    if args.plot:
        _plot_prediction(out / "prediction.svg", grid, target_row, pred,
                         bands if (args.bands and not args.noisy) else None)
    print(f"(p, d, dx, dy) = ({p}, {d}, {dx}, {dy}); wrote {out / 'prediction.csv'}")
    return 0


def _plot_prediction(path, grid, target_row, pred, bands) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    observed = ~np.isnan(target_row)
    ax.plot(grid.points[observed], target_row[observed], "k.", label="observed")
    ax.plot(pred.grid_points, pred.full_curve_part, "r--", label="full-curve")
    ax.plot(pred.grid_points, pred.combined, "b-", label="updated")
    if bands is not None:
        ax.fill_between(pred.grid_points, bands.lower, bands.upper,
                        alpha=0.2, color="b", label="bands")
    ax.legend(loc="best")
    ax.set_xlabel("t")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


_CONFIG_ALIASES = {"b": "n_replicates", "bootstrap": "n_replicates"}


def _parse_config_file(path: str) -> dict:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value")
        key, _, val = line.partition("=")
        values[key.strip().lower()] = val.strip()
    return values


def _coerce(field: dataclasses.Field, raw: str):
    text = str(field.type)
    if "bool" in text:
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in text:
        return int(raw)
    if "float" in text:
        return float(raw)
    return raw


def _sim_config_from_file(path: str | None, seed: int | None, jobs: int | None):
    raw = _parse_config_file(path) if path else {}
    for field in dataclasses.fields(simlab.SimConfig):
        env = os.environ.get(f"PFP_{field.name.upper()}")
        if env is not None:
            raw[field.name] = env
    protocol = raw.pop("protocol", "table1")
    settings = raw.pop("settings", None)
    profiles = raw.pop("profiles", None)
    noise_keys = {f.name: raw.pop(f.name) for f in dataclasses.fields(simlab.NoiseConfig)
                  if f.name in raw}
    band_keys = {f.name: raw.pop(f.name) for f in dataclasses.fields(simlab.BandConfig)
                 if f.name in raw}
    kwargs = {}
    for field in dataclasses.fields(simlab.SimConfig):
        if field.name in raw:
            kwargs[field.name] = _coerce(field, raw.pop(field.name))
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    if noise_keys or protocol == "noisy":
        coerced = {f.name: _coerce(f, noise_keys[f.name])
                   for f in dataclasses.fields(simlab.NoiseConfig) if f.name in noise_keys}
        kwargs["noise"] = simlab.NoiseConfig(**coerced)
    if band_keys or protocol == "bands":
        coerced = {f.name: _coerce(f, band_keys[f.name])
                   for f in dataclasses.fields(simlab.BandConfig) if f.name in band_keys}
        kwargs["bands"] = simlab.BandConfig(**coerced)
    if seed is not None:
        kwargs["seed"] = seed
    if jobs is not None:
        kwargs["n_jobs"] = jobs
    config = simlab.SimConfig(**kwargs)
    if settings:
        pairs = []
        for chunk in settings.split(","):
            k1, _, k2 = chunk.partition(":")
            pairs.append((float(k1), float(k2)))
        settings = tuple(pairs)
    if profiles:
        profiles = tuple(p.strip() for p in profiles.split(","))
    return config, protocol, settings, profiles


def _cmd_simlab_run(args) -> int:
    config, protocol, settings, profiles = _sim_config_from_file(
        args.config, args.seed, args.jobs)
    if args.protocol:
        protocol = args.protocol
    if protocol == "table1":
        report = simlab.run_table(config, settings or simlab.DEFAULT_SETTINGS,
                                  profiles or ("sigma1", "sigma2"))
    elif protocol == "single":
        report = simlab.run_protocol(config)
    elif protocol == "joint":
        report = simlab.run_joint_protocol(config)
    elif protocol == "noisy":
        report = simlab.run_noisy_protocol(config)
    elif protocol == "bands":
        report = simlab.run_band_protocol(config)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    out = _outdir(args)
    (out / f"{protocol}.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / f"{protocol}.md").write_text(report.to_markdown(), encoding="utf-8")
    if args.plot:
        _plot_sample_paths(out / f"{protocol}_sample.svg", config)
    print(report.to_markdown())
    print(f"outputs in {out}")
    return 0


def _plot_sample_paths(path, config) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0, 99)))
    sim = simlab.simulate_far(config, rng)
    values = sim.series.values()[:7]
    fig, ax = plt.subplots(figsize=(7, 4))
    for row in values:
        ax.plot(sim.series.grid.points, row, lw=1)
    ax.set_xlabel("t")
    ax.set_title("sample trajectories")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


# ---------------------------------------------------------------------------


def _add_common_io(sub, with_dim=True):
    sub.add_argument("--in", dest="input", required=True, help="wide-format curve CSV")
    sub.add_argument("--grid", help="optional file with grid points")
    sub.add_argument("--out", default="pfp_out", help="output directory")
    if with_dim:
        sub.add_argument("--basis", default="bspline",
                         choices=["fourier", "bspline", "nodal"])
        sub.add_argument("--dim", type=int, default=10, help="basis dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfp",
                                     description="partial functional prediction")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("fpca", help="principal component decomposition")
    _add_common_io(sp)
    sp.set_defaults(func=_cmd_fpca)

    sp = subs.add_parser("far-predict", help="full-curve forecasts")
    _add_common_io(sp)
    sp.add_argument("--p", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--window", type=int)
    sp.add_argument("--p-max", type=int, default=3)
    sp.add_argument("--d-max", type=int, default=10)
    sp.set_defaults(func=_cmd_far_predict)

    sp = subs.add_parser("ffr", help="intraday regression on one curve set")
    _add_common_io(sp)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--dx", type=int)
    sp.add_argument("--dy", type=int)
    sp.add_argument("--select", action="store_true")
    sp.add_argument("--dx-max", type=int, default=12)
    sp.add_argument("--dy-max", type=int, default=12)
    sp.add_argument("--kernel", action="store_true", help="export kernel surface")
    sp.set_defaults(func=_cmd_ffr)

    sp = subs.add_parser("predict", help="update the forecast of a partial curve")
    _add_common_io(sp)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--p", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--dx", type=int)
    sp.add_argument("--dy", type=int)
    sp.add_argument("--select", action="store_true",
                    help="joint order/dimension selection")
    sp.add_argument("--window", type=int)
    sp.add_argument("--p-max", type=int, default=3)
    sp.add_argument("--d-max", type=int, default=10)
    sp.add_argument("--dx-max", type=int, default=12)
    sp.add_argument("--dy-max", type=int, default=12)
    sp.add_argument("--noisy", action="store_true",
                    help="add the AR correction for rough data")
    sp.add_argument("--h", type=int, default=1, help="grid points ahead (noisy mode)")
    sp.add_argument("--bands", type=int, default=0,
                    help="bootstrap replicates for prediction bands")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--var-threshold", type=float, default=0.8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=_cmd_predict)

    sp = subs.add_parser("simlab", help="simulation protocols")
    lab_subs = sp.add_subparsers(dest="lab_command", required=True)
    sp_run = lab_subs.add_parser("run")
    sp_run.add_argument("--config", help="key=value config file")
    sp_run.add_argument("--protocol",
                        choices=["table1", "single", "joint", "noisy", "bands"])
    sp_run.add_argument("--seed", type=int, default=None,
                        help="override the config file seed")
    sp_run.add_argument("--jobs", type=int)
    sp_run.add_argument("--out", default="pfp_out")
    sp_run.add_argument("--plot", action="store_true")
    sp_run.set_defaults(func=_cmd_simlab_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
