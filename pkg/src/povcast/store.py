"""On-disk format for posterior sample bundles.

A bundle directory holds one CSV per draw family plus ``manifest.json``
recording the chain configuration and seed.  Floats are written with
round-trip repr so load(save(x)) is bit-exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .chain import ChainConfig, PosteriorSamples
from .errors import ParseError
from .model import Hyperparams

FORMAT = "povcast-samples-v1"

_FILES = {
    "hyper": "hyper.csv",
    "lambda": "lambda.csv",
    "tau": "tau.csv",
    "beta": "beta.csv",
    "pred_next": "pred_next.csv",
    "pred_next2": "pred_next2.csv",
}


def _write_csv(path: Path, header, rows, as_int: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(int(v)) if as_int else repr(float(v)) for v in row])


def _read_csv(path: Path, as_int: bool):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    cast = int if as_int else float
    try:
        data = [[cast(cell) for cell in row] for row in rows[1:]]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    dtype = np.int64 if as_int else np.float64
    return header, np.array(data, dtype=dtype)


def save_samples(
    samples: PosteriorSamples,
    config: ChainConfig,
    out_dir: str | Path,
    extra: dict | None = None,
) -> Path:
    """Write the bundle; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = list(samples.entity_names)
    _write_csv(out / _FILES["hyper"], list(Hyperparams.FIELDS), samples.hyper_draws, False)
    _write_csv(out / _FILES["lambda"], names, samples.lambda_draws, False)
    _write_csv(out / _FILES["tau"], names, samples.tau_draws, False)
    _write_csv(out / _FILES["beta"], names, samples.beta_draws, False)
    _write_csv(out / _FILES["pred_next"], names, samples.pred_next, True)
    _write_csv(out / _FILES["pred_next2"], names, samples.pred_next2, True)
    manifest = {
        "format": FORMAT,
        "config": asdict(config),
        "seed": config.seed,
        "entity_names": names,
        "n": samples.n,
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_samples(bundle_dir: str | Path) -> tuple[PosteriorSamples, dict]:
    bundle = Path(bundle_dir)
    manifest_path = bundle / "manifest.json"
    if not manifest_path.is_file():
        raise ParseError(f"{bundle}: no manifest.json; not a samples bundle")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != FORMAT:
        raise ParseError(f"{bundle}: unexpected bundle format {manifest.get('format')!r}")
    _, hyper = _read_csv(bundle / _FILES["hyper"], False)
    names, lam = _read_csv(bundle / _FILES["lambda"], False)
    _, tau = _read_csv(bundle / _FILES["tau"], False)
    _, beta = _read_csv(bundle / _FILES["beta"], False)
    _, p1 = _read_csv(bundle / _FILES["pred_next"], True)
    _, p2 = _read_csv(bundle / _FILES["pred_next2"], True)
    samples = PosteriorSamples(hyper, lam, tau, beta, p1, p2, tuple(names))
    return samples, manifest
