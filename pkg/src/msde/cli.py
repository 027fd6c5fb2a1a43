"""Command line interface.

Subcommands:

* ``run``        integrate the two-time-scale system (optionally alongside
                 its averaged equation) and write trajectory CSVs
* ``probe``      sample-test the declared structural inequalities
* ``average``    tabulate the averaged drift and diffusion
* ``deviation``  estimate the deviation noise matrix and exponent
* ``longtime``   sweep the distance to the averaged stationary law
* ``oracles``    run the built-in reference-value suite
* ``plot``       render a trajectory CSV to a self-contained SVG

Every data file a command writes is listed with its SHA-256 in a
``manifest.json`` sitting next to it; rerunning the same command reproduces
the data files byte for byte (the manifest's wall-clock field is the one
exception, and it is the only one).

Exit codes: 0 on success, 1 on a numerical or validation failure, 2 on
command line usage errors.  ``--threads N`` (or the MSDE_THREADS
environment variable) caps the BLAS thread pools; it must act before numpy
is first imported, which is why this module imports the numerical stack
lazily inside the subcommand handlers.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_SCHEME_CHOICES = ("semi-implicit-fast", "tamed-euler", "euler-maruyama")


# ---------------------------------------------------------------------------
# small argument and output helpers
# ---------------------------------------------------------------------------


def _floats_arg(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _grid_arg(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected LO:HI:N, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:N with numeric parts, got {text!r}")
    if n < 2 or hi <= lo:
        raise argparse.ArgumentTypeError(f"grid needs HI > LO and N >= 2, got {text!r}")
    return lo, hi, n


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_table(path: Path, header: list[str], rows) -> None:
    """CSV with LF endings and shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, float) else str(v) for v in row]
            )


class _Manifest:
    """Collects written files and finishes with a manifest.json."""

    def __init__(self, out_dir: Path, argv: list[str], config_sha: str | None):
        self.out_dir = out_dir
        self.argv = argv
        self.config_sha = config_sha
        self.files: list[Path] = []
        self.started = time.perf_counter()
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        target = self.out_dir / name
        self.files.append(target)
        return target

    def finish(self) -> Path:
        import numpy
        import scipy

        from . import __version__

        manifest = {
            "command": self.argv,
            "package": {"name": "msde", "version": __version__},
            "python": sys.version.split()[0],
            "libraries": {"numpy": numpy.__version__, "scipy": scipy.__version__},
            "config_sha256": self.config_sha,
            "outputs": [
                {"file": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)}
                for p in self.files
            ],
            "wall_seconds": round(time.perf_counter() - self.started, 3),
        }
        target = self.out_dir / "manifest.json"
        target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return target


def _add_model_args(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="registered model id (see 'msde run --model list')")
    group.add_argument("--config", help="model definition file (.json or .toml)")
    sub.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="numeric factory parameter for --model (repeatable)",
    )


def _load_model(args, parser: argparse.ArgumentParser):
    if args.config:
        from .config import load_model_config

        path = Path(args.config)
        model = load_model_config(path)
        return model, hashlib.sha256(path.read_bytes()).hexdigest()
    from .models import get_model, model_ids

    if args.model == "list":
        print("registered models: " + ", ".join(model_ids()))
        parser.exit(EXIT_OK)
    params = {}
    for item in args.param or []:
        key, sep, raw = item.partition("=")
        if not sep:
            parser.error(f"--param needs KEY=VALUE, got {item!r}")
        try:
            params[key] = float(raw)
        except ValueError:
            parser.error(f"--param {key} needs a numeric value, got {raw!r}")
    return get_model(args.model, **params), None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_run(args, parser) -> int:
    import numpy as np

    from .averaging import averaged_model, default_multiscale_cfg, simulate_averaged
    from .integrate import IntegratorConfig, integrate_multiscale
    from .noise import NoisePath

    model, config_sha = _load_model(args, parser)
    cfg = default_multiscale_cfg(model, args.eps, args.horizon, n_records=args.records)
    if args.dt is not None:
        cfg = IntegratorConfig(
            scheme=args.scheme, dt=args.dt, fast_substeps=args.fast_substeps
        )
    elif args.scheme != cfg.scheme or args.fast_substeps != 1:
        cfg = IntegratorConfig(
            scheme=args.scheme, dt=cfg.dt, fast_substeps=args.fast_substeps
        )
    n_steps = int(round(args.horizon / cfg.dt))
    stride = max(1, n_steps // args.records)

    x0 = args.x0 if args.x0 is not None else [0.0] * model.d1
    y0 = args.y0 if args.y0 is not None else [0.0] * model.d2
    noise = NoisePath(seed=args.seed, stream_id=args.stream)

    manifest = _Manifest(Path(args.out), args.argv, config_sha)
    bundle = integrate_multiscale(
        model,
        args.eps,
        np.asarray(x0),
        np.asarray(y0),
        args.horizon,
        cfg=cfg,
        noise=noise,
        n_paths=args.paths,
        record_stride=stride,
        on_overflow="flag",
    )
    bundle.write_csv(manifest.path("multiscale.csv"))
    n_exploded = int(bundle.exploded.sum())
    print(
        f"multiscale: {bundle.n_paths} paths, {bundle.t.size} records, "
        f"dt={cfg.dt:g}, scheme={cfg.scheme}"
    )
    if n_exploded:
        print(f"warning: {n_exploded} path(s) exploded and were frozen", file=sys.stderr)

    avg_bundle = None
    if args.averaged:
        avg = averaged_model(model)
        avg_bundle = simulate_averaged(
            avg,
            np.asarray(x0),
            args.horizon,
            cfg=cfg,
            noise=noise,
            n_paths=args.paths,
            record_stride=stride,
            on_overflow="flag",
        )
        avg_bundle.write_csv(manifest.path("averaged.csv"))
        print(f"averaged: coupled through the same slow noise, source={avg.source}")

    if args.plot:
        from .svg import LinePlot

        plot = LinePlot(
            title=f"{model.model_id} at eps={args.eps:g}", xlabel="t", ylabel="x1"
        )
        plot.add("multiscale mean", bundle.t, bundle.x[:, :, 0].mean(axis=0))
        if avg_bundle is not None:
            plot.add("averaged mean", avg_bundle.t, avg_bundle.x[:, :, 0].mean(axis=0))
        plot.write(manifest.path("run.svg"))

    manifest_path = manifest.finish()
    print(f"wrote {len(manifest.files)} file(s) + {manifest_path.name} in {manifest.out_dir}")
    if n_exploded == bundle.n_paths:
        print("error: every path exploded; reduce --dt or --eps", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_probe(args, parser) -> int:
    from .models import ModelError, probe_assumption, supported_assumptions

    model, _ = _load_model(args, parser)
    ids = args.assumption or list(supported_assumptions())
    any_fail = False
    width = max(len(i) for i in ids)
    for assumption_id in ids:
        try:
            report = probe_assumption(model, assumption_id, n_points=args.points, seed=args.seed)
        except ModelError as err:
            print(f"SKIP  {assumption_id:<{width}}  {err}")
            continue
        status = "PASS" if report.passed else "FAIL"
        any_fail = any_fail or not report.passed
        note = f"  ({report.note})" if report.note else ""
        print(
            f"{status}  {assumption_id:<{width}}  {report.n_fail}/{report.n_points} "
            f"violations, worst margin {report.worst_margin:.3g}{note}"
        )
        if report.witness is not None and args.verbose:
            print(f"      worst point: {report.witness}")
    for text in model.meta.warnings:
        print(f"note: {text}")
    if any_fail and args.strict:
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_average(args, parser) -> int:
    import numpy as np

    from .averaging import averaged_model
    from .frozen import averaged_diffusion_bar

    model, config_sha = _load_model(args, parser)
    lo, hi, n = args.grid
    avg = averaged_model(
        model, source=args.source, grid=(lo, hi, n), n_samples=args.samples, seed=args.seed
    )
    manifest = _Manifest(Path(args.out), args.argv, config_sha)
    if model.d1 == 1:
        xs = np.linspace(lo, hi, n)
        rows = [(float(x), float(avg.f_bar(np.array([x]))[0])) for x in xs]
        _write_table(manifest.path("averaged_drift.csv"), ["x", "f_bar"], rows)
    else:
        print(f"averaged drift table skipped: d1={model.d1} (grids are one-dimensional)")
    diff = averaged_diffusion_bar(model, np.zeros(model.d1))
    _write_table(
        manifest.path("averaged_diffusion.csv"),
        ["i", "j", "sigma_bar"],
        [
            (i, j, float(avg.sigma_bar[i, j]))
            for i in range(model.d1)
            for j in range(model.d1)
        ],
    )
    if args.plot and model.d1 == 1:
        from .svg import LinePlot

        plot = LinePlot(title=f"averaged drift of {model.model_id}", xlabel="x", ylabel="f_bar")
        plot.add("f_bar", [r[0] for r in rows], [r[1] for r in rows])
        plot.write(manifest.path("averaged_drift.svg"))
    manifest_path = manifest.finish()
    print(f"source: {avg.source}; sigma_bar max mismatch {diff.mismatch:.3g}")
    print(f"wrote {len(manifest.files)} file(s) + {manifest_path.name} in {manifest.out_dir}")
    return EXIT_OK


def _cmd_deviation(args, parser) -> int:
    import numpy as np

    from .deviation import deviation_exponent, estimate_G

    model, config_sha = _load_model(args, parser)
    x = np.asarray(args.x if args.x is not None else [0.0] * model.d1)
    rho = deviation_exponent(model.scales)
    print(f"deviation exponent: {rho:g}")

    est = estimate_G(
        model,
        x,
        n_draws=args.draws,
        t_cut=args.t_cut,
        dt=args.dt,
        seed=args.seed,
        method=args.method,
    )
    manifest = _Manifest(Path(args.out), args.argv, config_sha)
    d = est.gg_t.shape[0]
    _write_table(
        manifest.path("g_matrix.csv"),
        ["i", "j", "gg_t", "se", "limit_covariance"],
        [
            (i, j, float(est.gg_t[i, j]), float(est.se[i, j]), float(est.limit_covariance[i, j]))
            for i in range(d)
            for j in range(d)
        ],
    )
    print(f"gg_t[0,0] = {est.gg_t[0, 0]:.6g} (se {est.se[0, 0]:.2g}, method {est.method})")
    if args.cross_check:
        other = "poisson-rep" if args.method == "autocovariance" else "autocovariance"
        second = estimate_G(
            model, x, n_draws=args.draws, t_cut=args.t_cut, dt=args.dt,
            seed=args.seed, method=other,
        )
        gap = float(np.max(np.abs(est.gg_t - second.gg_t)))
        band = 3.0 * float(np.max(np.hypot(est.se, second.se)))
        verdict = "agree" if gap <= band else "DISAGREE"
        print(f"cross-check ({other}): max gap {gap:.3g} vs 3*SE {band:.3g} -> {verdict}")
        if gap > band:
            manifest.finish()
            return EXIT_FAILURE
    manifest_path = manifest.finish()
    print(f"wrote {len(manifest.files)} file(s) + {manifest_path.name} in {manifest.out_dir}")
    return EXIT_OK


def _cmd_longtime(args, parser) -> int:
    from .longtime import quasi_periodic_sweep

    model, config_sha = _load_model(args, parser)
    report = quasi_periodic_sweep(
        model,
        args.eps_list,
        n_paths=args.paths,
        replicates=args.replicates,
        n_grid=args.grid_points,
        quasi_periods=args.quasi_periods,
        seed=args.seed,
        reference_n=args.reference_n,
    )
    manifest = _Manifest(Path(args.out), args.argv, config_sha)
    _write_table(
        manifest.path("longtime_sweep.csv"),
        ["epsilon", "max_dbl", "se"],
        [(float(r.epsilon), float(r.max_dbl), float(r.se)) for r in report.rows],
    )
    for row in report.rows:
        print(f"eps={row.epsilon:g}: max d_BL = {row.max_dbl:.4f} +- {row.se:.4f}")
    if report.trend_z is None:
        print("trend largest->smallest eps: n/a (needs two or more epsilons)")
    else:
        trend = "decreasing" if report.trend_decreasing else "NOT decreasing"
        print(f"trend largest->smallest eps: {trend} (z = {report.trend_z:.2f})")
    manifest_path = manifest.finish()
    print(f"wrote {len(manifest.files)} file(s) + {manifest_path.name} in {manifest.out_dir}")
    return EXIT_OK


def _cmd_oracles(args, parser) -> int:
    from .oracles import format_text, junit_xml, run_oracle_suite

    names = args.case or None
    try:
        results = run_oracle_suite(names)
    except KeyError as err:
        parser.error(str(err.args[0]))
    sys.stdout.write(format_text(results))
    if args.junit:
        target = Path(args.junit)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(junit_xml(results))
        print(f"wrote {target}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def _cmd_plot(args, parser) -> int:
    from .svg import LinePlot

    source = Path(args.input)
    if not source.exists():
        print(f"error: input file not found: {source}", file=sys.stderr)
        return EXIT_FAILURE
    by_path: dict[str, tuple[list[float], list[float]]] = {}
    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or args.column not in reader.fieldnames:
            have = ", ".join(reader.fieldnames or [])
            print(
                f"error: column {args.column!r} not in {source.name} (columns: {have})",
                file=sys.stderr,
            )
            return EXIT_FAILURE
        for row in reader:
            ts, vs = by_path.setdefault(row["path"], ([], []))
            ts.append(float(row["t"]))
            vs.append(float(row[args.column]))
    if not by_path:
        print(f"error: {source.name} holds no data rows", file=sys.stderr)
        return EXIT_FAILURE

    plot = LinePlot(
        title=args.title or source.stem,
        xlabel="t",
        ylabel=args.column,
        xscale="log" if args.logx else "linear",
        yscale="log" if args.logy else "linear",
    )
    if args.what == "mean":
        first = next(iter(by_path.values()))[0]
        n = len(first)
        mean = [0.0] * n
        for ts, vs in by_path.values():
            if len(vs) != n:
                print("error: paths have unequal record counts", file=sys.stderr)
                return EXIT_FAILURE
            for k, v in enumerate(vs):
                mean[k] += v
        mean = [v / len(by_path) for v in mean]
        plot.add(f"mean over {len(by_path)} paths", first, mean)
    else:
        for pid in list(by_path)[: args.max_paths]:
            ts, vs = by_path[pid]
            plot.add(f"path {pid}" if len(by_path) > 1 else "", ts, vs)
    plot.write(Path(args.out))
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msde",
        description="Two-time-scale SDE toolkit: averaging, deviations, long-time laws.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="cap BLAS thread pools (also read from MSDE_THREADS)",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="integrate the system and write trajectory CSVs")
    _add_model_args(run)
    run.add_argument("--eps", type=float, required=True, help="scale parameter in (0, 1]")
    run.add_argument("--horizon", type=float, required=True, help="final physical time")
    run.add_argument("--dt", type=float, help="macro step (default: resolves the fast scale)")
    run.add_argument("--scheme", choices=_SCHEME_CHOICES, default="semi-implicit-fast")
    run.add_argument("--fast-substeps", type=int, default=1)
    run.add_argument("--paths", type=int, default=4)
    run.add_argument("--records", type=int, default=100, help="recorded time points per path")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--stream", type=int, default=0, help="noise stream id (ensemble tag)")
    run.add_argument("--x0", type=_floats_arg, help="slow initial state, comma separated")
    run.add_argument("--y0", type=_floats_arg, help="fast initial state, comma separated")
    run.add_argument("--averaged", action="store_true", help="also run the averaged equation")
    run.add_argument("--plot", action="store_true", help="write an SVG of the mean path")
    run.add_argument("--out", default="msde-out", help="output directory")
    run.set_defaults(handler=_cmd_run)

    probe = subs.add_parser("probe", help="sample-test declared structural inequalities")
    _add_model_args(probe)
    probe.add_argument(
        "--assumption",
        action="append",
        help="assumption id (repeatable; default: all supported)",
    )
    probe.add_argument("--points", type=int, default=10_000)
    probe.add_argument("--seed", type=int, default=0)
    probe.add_argument("--strict", action="store_true", help="exit 1 when any probe fails")
    probe.add_argument("--verbose", action="store_true", help="print worst-point witnesses")
    probe.set_defaults(handler=_cmd_probe)

    average = subs.add_parser("average", help="tabulate averaged drift and diffusion")
    _add_model_args(average)
    average.add_argument("--grid", type=_grid_arg, default=(-2.0, 2.0, 41), help="LO:HI:N")
    average.add_argument("--samples", type=int, default=20_000)
    average.add_argument("--seed", type=int, default=0)
    average.add_argument(
        "--source", choices=("auto", "analytic", "table"), default="auto"
    )
    average.add_argument("--plot", action="store_true")
    average.add_argument("--out", default="msde-out")
    average.set_defaults(handler=_cmd_average)

    deviation = subs.add_parser("deviation", help="estimate the deviation noise matrix")
    _add_model_args(deviation)
    deviation.add_argument("--x", type=_floats_arg, help="frozen slow state (default 0)")
    deviation.add_argument("--draws", type=int, default=4000)
    deviation.add_argument("--t-cut", type=float, default=None)
    deviation.add_argument("--dt", type=float, default=5e-3)
    deviation.add_argument("--seed", type=int, default=0)
    deviation.add_argument(
        "--method", choices=("autocovariance", "poisson-rep"), default="autocovariance"
    )
    deviation.add_argument(
        "--cross-check",
        action="store_true",
        help="rerun with the other estimator and compare within 3*SE",
    )
    deviation.add_argument("--out", default="msde-out")
    deviation.set_defaults(handler=_cmd_deviation)

    longtime = subs.add_parser(
        "longtime", help="sweep the distance to the averaged stationary law"
    )
    _add_model_args(longtime)
    longtime.add_argument(
        "--eps-list", type=_floats_arg, required=True, help="comma-separated epsilons"
    )
    longtime.add_argument("--paths", type=int, default=600)
    longtime.add_argument("--replicates", type=int, default=4)
    longtime.add_argument("--grid-points", type=int, default=9)
    longtime.add_argument("--quasi-periods", type=float, default=4.0)
    longtime.add_argument("--reference-n", type=int, default=1000)
    longtime.add_argument("--seed", type=int, default=0)
    longtime.add_argument("--out", default="msde-out")
    longtime.set_defaults(handler=_cmd_longtime)

    oracles = subs.add_parser("oracles", help="run the built-in reference-value suite")
    oracles.add_argument("--case", action="append", help="case name (repeatable; default all)")
    oracles.add_argument("--junit", help="also write a JUnit XML report to this path")
    oracles.set_defaults(handler=_cmd_oracles)

    plot = subs.add_parser("plot", help="render a trajectory CSV to SVG")
    plot.add_argument("--input", required=True, help="CSV written by 'msde run'")
    plot.add_argument("--out", default="plot.svg")
    plot.add_argument("--column", default="x1")
    plot.add_argument("--what", choices=("mean", "paths"), default="mean")
    plot.add_argument("--max-paths", type=int, default=12)
    plot.add_argument("--logx", action="store_true")
    plot.add_argument("--logy", action="store_true")
    plot.add_argument("--title", default="")
    plot.set_defaults(handler=_cmd_plot)

    return parser


def _apply_thread_cap(threads: int | None) -> None:
    value = threads if threads is not None else os.environ.get("MSDE_THREADS")
    if value is None:
        return
    value = str(int(value))
    already_loaded = "numpy" in sys.modules
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, value)
    if already_loaded and threads is not None:
        print(
            "warning: numpy was already imported; --threads may not take effect",
            file=sys.stderr,
        )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(argv)
    args.argv = list(argv)
    try:
        _apply_thread_cap(args.threads)
    except ValueError:
        parser.error("--threads/MSDE_THREADS must be an integer")
    try:
        return args.handler(args, parser)
    except KeyboardInterrupt:
        return 130
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
