"""Command-line interface.

Commands: ``fit``, ``report``, ``calibrate``, ``validate``, ``replay``.
Every command writes a ``run_manifest.json`` into its output directory;
``replay`` re-executes a manifest and reproduces the numeric artifacts
byte for byte.

Exit codes: 0 ok, 2 configuration/usage, 3 parse/format, 4 io,
5 calibration with too many failed replicates.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import secrets
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import analysis, data as data_mod, store, svgplot
from .chain import ChainConfig, run_chain
from .errors import (
    ConfigError,
    DomainError,
    EmptyError,
    ParseError,
    PovcastError,
    ShapeError,
)
from .model import Hyperparams
from .rng import RngState

DEFAULT_SEED = 424242

EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_IO = 4
EXIT_PARTIAL = 5


def _coerce_seed(value: str) -> int:
    if value == "random":
        return secrets.randbits(63)
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"seed must be an integer or 'random', got {value!r}") from None


def _parse_indices(text: str) -> list[int]:
    """Accepts '1-9' ranges and '1,3,5' lists, 1-based."""
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "-" in chunk[1:]:
            lo, hi = chunk.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            out.append(int(chunk))
    if not out:
        raise ConfigError(f"empty index selection: {text!r}")
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, params: dict, seed: int,
                    artifacts: list[str], duration: float, data_path: str | None = None) -> None:
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "data_path": data_path,
        "data_sha256": _sha256(Path(data_path)) if data_path else None,
        "artifacts": sorted(artifacts),
        "duration_s": duration,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, ShapeError, EmptyError) as exc:
            click.echo(f"parse error: {exc}", err=True)
            sys.exit(EXIT_PARSE)
        except (ConfigError, DomainError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except FileNotFoundError as exc:
            click.echo(f"io error: {exc.filename or exc}", err=True)
            sys.exit(EXIT_IO)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except PovcastError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


# --------------------------------------------------------------------------
# command implementations (also used by replay)
# --------------------------------------------------------------------------

def do_fit(params: dict) -> list[str]:
    data_path = Path(params["data_path"])
    out_dir = Path(params["out_dir"])
    matrix = data_mod.load_matrix(data_path)
    history = data_mod.new_entity_counts(matrix)
    if params.get("smooth"):
        j1, j2 = params["smooth"]
        weights = params.get("weights") or (None, None)
        train = data_mod.smooth(matrix, j1, j2, weights[0], weights[1])
    else:
        train = matrix
    config = ChainConfig(
        iterations=params["iterations"],
        burn_in=params["burn_in"],
        thin=params["thin"],
        grid_points=params["grid_points"],
        lambda_grid_max=params.get("lambda_grid_max"),
        seed=params["seed"],
        random_start=params.get("random_start", False),
    )
    samples = run_chain(train, config)
    store.save_samples(
        samples,
        config,
        out_dir,
        extra={
            "data_sha256": _sha256(data_path),
            "smooth": params.get("smooth"),
            "smooth_weights": params.get("weights"),
            "new_entity_history": history,
            "tau_update": "grid",  # same histogram mechanism as the other latents
        },
    )
    return sorted(p.name for p in out_dir.iterdir())


def do_report(params: dict) -> list[str]:
    samples_dir = Path(params["samples_dir"])
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    samples, manifest = store.load_samples(samples_dir)
    artifacts: list[str] = []

    for step, tag in ((1, "next"), (2, "next2")):
        table = analysis.predictive_table(samples, step)
        path = out_dir / f"pred_table_{tag}.csv"
        _write_table(
            path,
            ["entity", *range(table.histogram.shape[1])],
            [[name, *map(int, row)] for name, row in zip(table.entity_names, table.histogram)],
        )
        artifacts.append(path.name)

    p1 = analysis.zero_probability(samples, 1)
    p2 = analysis.zero_probability(samples, 2)
    order = np.argsort(-p1, kind="stable")
    path = out_dir / "zero_probability.csv"
    _write_table(
        path,
        ["entity", "p_zero_next", "p_zero_next2"],
        [[samples.entity_names[i], _fmt(p1[i]), _fmt(p2[i])] for i in order],
    )
    artifacts.append(path.name)

    estimate = analysis.new_entity_estimate(samples, params.get("typical_total", 70.0))
    payload = asdict(estimate)
    if manifest.get("new_entity_history") is not None:
        payload["historical_new_entity_counts"] = manifest["new_entity_history"]
    path = out_dir / "new_entity_estimate.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts.append(path.name)

    if params.get("svg"):
        chart = out_dir / "zero_probability.svg"
        svgplot.zero_probability_chart(samples.entity_names, p1, p2, chart)
        artifacts.append(chart.name)
        table = analysis.predictive_table(samples, 1)
        hist_dir = out_dir / "predictive_histograms"
        hist_dir.mkdir(exist_ok=True)
        for i, name in enumerate(table.entity_names):
            safe = name.replace(" ", "_")
            svgplot.histogram_chart(table.histogram[i], hist_dir / f"{safe}.svg", title=name)
        artifacts.append(hist_dir.name)
    return artifacts


def do_calibrate(params: dict) -> tuple[list[str], int]:
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    base = Hyperparams(*params["base"])
    config = ChainConfig(
        iterations=params["iterations"],
        burn_in=params["burn_in"],
        thin=params["thin"],
        grid_points=params["grid_points"],
        seed=params["seed"],
    )
    rng = RngState(params["seed"])
    result = analysis.calibration_study(
        rng,
        base,
        replicates=params["replicates"],
        chain_config=config,
        n_entities=params.get("entities", 24),
        n_periods=params.get("periods", 5),
        drop_zero_rows=params.get("drop_zero_rows", False),
    )
    artifacts = []
    for tag, report in (("hyper", result.hyper), ("predictive", result.predictive)):
        path = out_dir / f"coverage_{tag}.csv"
        cov = report.coverage()
        _write_table(
            path,
            ["alpha", "actual_coverage", "hits", "totals"],
            [
                [_fmt(a), _fmt(cov[a]), int(h), int(t)]
                for a, h, t in zip(report.alphas, report.hits, report.totals)
            ],
        )
        artifacts.append(path.name)
        if params.get("svg"):
            chart = out_dir / f"coverage_{tag}.svg"
            svgplot.coverage_chart(
                report.alphas, [cov[a] for a in report.alphas], chart, title=f"{tag} coverage"
            )
            artifacts.append(chart.name)
    log = {
        "replicates_requested": params["replicates"],
        "replicates_completed": result.hyper.replicates,
        "failed": [{"replicate": r, "error": msg} for r, msg in result.failed],
        "base": list(params["base"]),
        "drop_zero_rows": params.get("drop_zero_rows", False),
        "chain": asdict(config),
    }
    path = out_dir / "replicates.json"
    path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts.append(path.name)
    return artifacts, len(result.failed)


def do_validate(params: dict) -> list[str]:
    data_path = Path(params["data_path"])
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = data_mod.load_matrix(data_path)
    rows = params.get("train_rows") or list(range(1, matrix.n_entities + 1))
    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        sliced = data_mod.submatrix(matrix, rows, range(1, matrix.n_periods + 1))
    config = ChainConfig(
        iterations=params["iterations"],
        burn_in=params["burn_in"],
        thin=params["thin"],
        grid_points=params["grid_points"],
        seed=params["seed"],
    )
    note = ""
    if params["target_col"] >= 4:
        note = "evaluation heuristic only: the target period is affected by the split-book smoothing caveat"
    report = analysis.backtest(
        sliced,
        params["train_cols"],
        params["target_col"],
        chain_config=config,
        rng=RngState(params["seed"]),
        note=note,
    )
    artifacts = []
    path = out_dir / "validation.csv"
    _write_table(
        path,
        ["entity", "true_value", "lo50", "hi50", "lo80", "hi80", "hit50", "hit80"],
        [
            [name, int(v), *iv50, *iv80, int(h5), int(h8)]
            for name, v, iv50, iv80, h5, h8 in zip(
                report.entity_names,
                report.true_values,
                report.interval50,
                report.interval80,
                report.hit50,
                report.hit80,
            )
        ],
    )
    artifacts.append(path.name)
    summary = {
        "entities": len(report.entity_names),
        "hits50": int(report.hit50.sum()),
        "hits80": int(report.hit80.sum()),
        "dropped_zero_rows": list(report.dropped),
        "note": report.note,
    }
    path = out_dir / "validation_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts.append(path.name)
    if params.get("svg"):
        chart = out_dir / "validation.svg"
        svgplot.interval_chart(
            report.entity_names, report.true_values, report.interval50, report.interval80, chart
        )
        artifacts.append(chart.name)
    return artifacts


# --------------------------------------------------------------------------
# click wiring
# --------------------------------------------------------------------------

_chain_options = [
    click.option("--iterations", default=101000, show_default=True, type=int),
    click.option("--burn-in", "burn_in", default=1000, show_default=True, type=int),
    click.option("--thin", default=100, show_default=True, type=int),
    click.option("--grid", "grid_points", default=512, show_default=True, type=int),
    click.option("--seed", default=str(DEFAULT_SEED), show_default=True,
                 help="integer seed, or 'random' for entropy"),
]


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def main():
    """Windowed-Poisson count forecasting: fit, report, calibrate, validate."""


@main.command("fit")
@click.argument("data_path", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--smooth", nargs=2, type=int, default=None,
              help="1-based column pair to redistribute, e.g. --smooth 4 5")
@click.option("--weights", nargs=2, type=float, default=None,
              help="redistribution weights; defaults to the pair's column sums")
@click.option("--lambda-grid-max", type=float, default=None)
@click.option("--random-start", is_flag=True, default=False,
              help="perturb the deterministic initial state")
@_add_options(_chain_options)
@_exit_codes
def cmd_fit(data_path, out_dir, smooth, weights, lambda_grid_max, random_start,
            iterations, burn_in, thin, grid_points, seed):
    """Run the Gibbs sampler on a CSV count matrix and save the samples."""
    started = time.monotonic()
    params = {
        "data_path": str(data_path),
        "out_dir": str(out_dir),
        "smooth": list(smooth) if smooth else None,
        "weights": list(weights) if weights else None,
        "lambda_grid_max": lambda_grid_max,
        "random_start": random_start,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "grid_points": grid_points,
        "seed": _coerce_seed(seed),
    }
    artifacts = do_fit(params)
    _write_manifest(Path(out_dir), "fit", params, params["seed"], artifacts,
                    time.monotonic() - started, data_path=str(data_path))
    click.echo(f"wrote samples bundle to {out_dir}")


@main.command("report")
@click.argument("samples_dir", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--typical-total", default=70.0, show_default=True, type=float)
@click.option("--svg", is_flag=True, default=False)
@_exit_codes
def cmd_report(samples_dir, out_dir, typical_total, svg):
    """Emit predictive tables, zero probabilities and the new-entity estimate."""
    started = time.monotonic()
    params = {
        "samples_dir": str(samples_dir),
        "out_dir": str(out_dir),
        "typical_total": typical_total,
        "svg": svg,
    }
    artifacts = do_report(params)
    _write_manifest(Path(out_dir), "report", params, 0, artifacts, time.monotonic() - started)
    click.echo(f"wrote report to {out_dir}")


@main.command("calibrate")
@click.argument("out_dir", type=click.Path())
@click.option("--replicates", default=100, show_default=True, type=int)
@click.option("--base", default="1.3,0.75,2,1,4,1.5", show_default=True,
              help="comma-separated six-tuple of base hyperparameters")
@click.option("--drop-zero-rows", is_flag=True, default=False,
              help="delete all-zero training rows before each fit (bias experiment)")
@click.option("--entities", default=24, show_default=True, type=int)
@click.option("--periods", default=5, show_default=True, type=int)
@click.option("--svg", is_flag=True, default=False)
@click.option("--iterations", default=11000, show_default=True, type=int)
@click.option("--burn-in", "burn_in", default=1000, show_default=True, type=int)
@click.option("--thin", default=10, show_default=True, type=int)
@click.option("--grid", "grid_points", default=512, show_default=True, type=int)
@click.option("--seed", default=str(DEFAULT_SEED), show_default=True)
@_exit_codes
def cmd_calibrate(out_dir, replicates, base, drop_zero_rows, entities, periods, svg,
                  iterations, burn_in, thin, grid_points, seed):
    """Simulate-and-refit coverage study (reduced chains by default)."""
    started = time.monotonic()
    try:
        base_values = [float(v) for v in base.split(",")]
    except ValueError:
        raise ConfigError(f"could not parse --base {base!r}") from None
    if len(base_values) != 6:
        raise ConfigError("--base needs exactly six comma-separated values")
    params = {
        "out_dir": str(out_dir),
        "replicates": replicates,
        "base": base_values,
        "drop_zero_rows": drop_zero_rows,
        "entities": entities,
        "periods": periods,
        "svg": svg,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "grid_points": grid_points,
        "seed": _coerce_seed(seed),
    }
    artifacts, failed = do_calibrate(params)
    _write_manifest(Path(out_dir), "calibrate", params, params["seed"], artifacts,
                    time.monotonic() - started)
    click.echo(f"wrote coverage reports to {out_dir} ({failed} failed replicates)")
    if failed > 0.2 * replicates:
        click.echo("too many failed replicates", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command("validate")
@click.argument("data_path", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--train-rows", default=None, help="e.g. 1-9")
@click.option("--train-cols", default="1-2", show_default=True)
@click.option("--target-col", default=3, show_default=True, type=int)
@click.option("--svg", is_flag=True, default=False)
@click.option("--iterations", default=101000, show_default=True, type=int)
@click.option("--burn-in", "burn_in", default=1000, show_default=True, type=int)
@click.option("--thin", default=100, show_default=True, type=int)
@click.option("--grid", "grid_points", default=512, show_default=True, type=int)
@click.option("--seed", default=str(DEFAULT_SEED), show_default=True)
@_exit_codes
def cmd_validate(data_path, out_dir, train_rows, train_cols, target_col, svg,
                 iterations, burn_in, thin, grid_points, seed):
    """Backtest: fit on early periods, score intervals on a held-out period."""
    started = time.monotonic()
    params = {
        "data_path": str(data_path),
        "out_dir": str(out_dir),
        "train_rows": _parse_indices(train_rows) if train_rows else None,
        "train_cols": _parse_indices(train_cols),
        "target_col": target_col,
        "svg": svg,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "grid_points": grid_points,
        "seed": _coerce_seed(seed),
    }
    artifacts = do_validate(params)
    _write_manifest(Path(out_dir), "validate", params, params["seed"], artifacts,
                    time.monotonic() - started, data_path=str(data_path))
    click.echo(f"wrote validation report to {out_dir}")


@main.command("replay")
@click.argument("manifest_path", type=click.Path())
@click.argument("out_dir", type=click.Path())
@_exit_codes
def cmd_replay(manifest_path, out_dir, ):
    """Re-run a recorded command into a new output directory."""
    started = time.monotonic()
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    command = manifest.get("command")
    params = dict(manifest.get("params", {}))
    params["out_dir"] = str(out_dir)
    dispatch = {"fit": do_fit, "report": do_report, "validate": do_validate}
    if command in dispatch:
        artifacts = dispatch[command](params)
    elif command == "calibrate":
        artifacts, _ = do_calibrate(params)
    else:
        raise ConfigError(f"manifest has unknown command {command!r}")
    _write_manifest(Path(out_dir), command, params, params.get("seed", 0), artifacts,
                    time.monotonic() - started, data_path=params.get("data_path"))
    click.echo(f"replayed {command} into {out_dir}")


if __name__ == "__main__":
    main()
