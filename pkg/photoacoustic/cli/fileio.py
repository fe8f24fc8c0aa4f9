#!/usr/bin/env python3
"""
Observation and field files.

Each file is a pair: `<stem>.json` metadata and `<stem>.bin` raw little-endian float64
payload, row-major. Observations are stored as (node, time), time fastest; fields as
(component, angular node, radius), radius fastest.
"""

import json
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from photoacoustic.calculations.forward import CauchyField
from photoacoustic.calculations.harmonics import (
    AngularGrid,
    BallGrid,
    BoundaryObservation,
    ball_grid,
    circle_grid,
    sphere_grid,
)
from photoacoustic.errors import FileFormatError
from photoacoustic.models import FORMAT_VERSION, FileMetadata, RunReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PAYLOAD_DTYPE = "<f8"


def stem_of(path: PathLike) -> Path:
    """`out/run.json`, `out/run.bin` and `out/run` all name the pair `out/run`"""
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".json", ".bin") else path


def sibling(stem: Path, extension: str) -> Path:
    """`run.truth` + `.json` -> `run.truth.json`"""
    return stem.with_name(stem.name + extension)


def write_json(path: PathLike, payload: dict):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_pair(stem: Path, meta: FileMetadata, payload: np.ndarray) -> Tuple[Path, Path]:
    stem.parent.mkdir(parents=True, exist_ok=True)
    json_path, bin_path = sibling(stem, ".json"), sibling(stem, ".bin")
    write_json(json_path, meta.model_dump())
    bin_path.write_bytes(np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPE).tobytes())
    logger.info(f"wrote {json_path} + {bin_path.name} ({payload.size} samples)")
    return json_path, bin_path


def _read_pair(path: PathLike, kind: str) -> Tuple[FileMetadata, np.ndarray]:
    stem = stem_of(path)
    json_path, bin_path = sibling(stem, ".json"), sibling(stem, ".bin")
    try:
        meta = FileMetadata.model_validate(json.loads(json_path.read_text()))
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{json_path}: not valid JSON ({e.msg} at line {e.lineno})")
    except ValidationError as e:
        raise FileFormatError(f"{json_path}: bad metadata ({e.error_count()} problems: {e.errors()[0]['msg']})")
    if meta.format_version != FORMAT_VERSION:
        raise FileFormatError(f"{json_path}: format version {meta.format_version}, expected {FORMAT_VERSION}")
    if meta.kind != kind:
        raise FileFormatError(f"{json_path}: holds a {meta.kind}, expected a {kind}")
    payload = np.frombuffer(bin_path.read_bytes(), dtype=PAYLOAD_DTYPE)
    return meta, payload


def _angular_from(meta: FileMetadata) -> AngularGrid:
    try:
        if meta.dimension == 2:
            return circle_grid(meta.angular["n_phi"])
        return sphere_grid(meta.angular["n_theta"], meta.angular["n_phi"])
    except KeyError as e:
        raise FileFormatError(f"angular grid description lacks {e.args[0]}")


def _check_length(payload: np.ndarray, expected: int, what: str):
    if payload.size != expected:
        raise FileFormatError(f"{what}: payload holds {payload.size} samples, grid declares {expected}")


def write_observation(obs: BoundaryObservation, path: PathLike) -> Tuple[Path, Path]:
    meta = FileMetadata(
        kind="observation",
        dimension=obs.dimension,
        angular=obs.grid.describe(),
        T=obs.T,
        dt=obs.dt,
        n_times=obs.n_times,
        provenance=obs.provenance,
    )
    return _write_pair(stem_of(path), meta, obs.samples)


def read_observation(path: PathLike) -> BoundaryObservation:
    meta, payload = _read_pair(path, "observation")
    grid = _angular_from(meta)
    _check_length(payload, grid.n_nodes * meta.n_times, str(path))
    if meta.n_times < 2 or meta.dt <= 0:
        raise FileFormatError(f"{path}: needs dt > 0 and at least two time samples")
    samples = payload.reshape(grid.n_nodes, meta.n_times).copy()
    return BoundaryObservation(grid, meta.dt, samples, provenance=meta.provenance)


def write_field(field: CauchyField, path: PathLike, provenance: str = "") -> Tuple[Path, Path]:
    meta = FileMetadata(
        kind="field",
        dimension=field.dimension,
        angular=field.ball.angular.describe(),
        radii=[float(r) for r in field.ball.radii],
        components=["a", "b"],
        provenance=provenance,
    )
    return _write_pair(stem_of(path), meta, np.stack([field.a, field.b]))


def read_field(path: PathLike) -> CauchyField:
    meta, payload = _read_pair(path, "field")
    angular = _angular_from(meta)
    if len(meta.radii) < 2:
        raise FileFormatError(f"{path}: a field needs at least two radii")
    ball = ball_grid(angular, len(meta.radii))
    if not np.allclose(ball.radii, meta.radii, rtol=0.0, atol=1e-12):
        raise FileFormatError(f"{path}: radii are not the Gauss-Legendre nodes for n_r = {len(meta.radii)}")
    _check_length(payload, 2 * angular.n_nodes * len(meta.radii), str(path))
    values = payload.reshape(2, angular.n_nodes, len(meta.radii))
    return CauchyField(ball, values[0].copy(), values[1].copy())


def write_report(report: RunReport, path: PathLike) -> Path:
    out = sibling(stem_of(path), ".report.json")
    write_json(out, report.model_dump())
    return out


def observation_csv(obs: BoundaryObservation, path: PathLike) -> Path:
    """Columns t, node_index, value; time fastest within each node"""
    frame = pd.DataFrame({
        "t": np.tile(obs.times, obs.grid.n_nodes),
        "node_index": np.repeat(np.arange(obs.grid.n_nodes), obs.n_times),
        "value": obs.samples.ravel(),
    })
    out = sibling(stem_of(path), ".csv")
    frame.to_csv(out, index=False, float_format="%.17g")
    return out


def field_csv(field: CauchyField, path: PathLike) -> Path:
    """Radial slices: columns r, angular_index, a, b; radius fastest"""
    ball: BallGrid = field.ball
    n_ang, n_r = ball.shape
    frame = pd.DataFrame({
        "r": np.tile(ball.radii, n_ang),
        "angular_index": np.repeat(np.arange(n_ang), n_r),
        "a": field.a.ravel(),
        "b": field.b.ravel(),
    })
    out = sibling(stem_of(path), ".csv")
    frame.to_csv(out, index=False, float_format="%.17g")
    return out
