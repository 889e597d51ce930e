"""Artifact I/O: atomic writes, lossless CSV/JSON, field files, matrix export.

CSV payloads use '.' decimal, comma separators, a header row and 17-significant-
digit floats so re-running a config byte-reproduces them.  Timestamps never
enter payloads; they belong in the sidecar log only.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np
import scipy.io
import scipy.sparse as sp

from .fields import DistributionField
from .grid import GridSpec, VelocityGrid
from .mixture import MixtureConfig


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if hasattr(o, "as_dict"):
            return o.as_dict()
        raise TypeError(f"not JSON-serializable: {type(o)}")
    return json.dumps(obj, sort_keys=True, indent=1, default=default)


def short_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:12]


def config_hash(cfg: MixtureConfig) -> str:
    return short_hash(cfg.as_dict())


def grid_hash(spec: GridSpec) -> str:
    return short_hash(spec.as_dict())


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(path: str, obj) -> None:
    atomic_write_text(path, canonical_json(obj) + "\n")


def write_csv(path: str, columns: dict, comments: list[str] | None = None) -> None:
    """Column dict of equal-length arrays -> comma-separated, 17 sig digits."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = len(arrays[0])
    lines = [f"# {c}" for c in (comments or [])]
    lines.append(",".join(names))
    for r in range(n):
        lines.append(",".join(fmt_float(a[r]) for a in arrays))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> dict:
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    names = rows[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    return {k: data[:, i] for i, k in enumerate(names)}


def field_header(cfg: MixtureConfig, grid: VelocityGrid, kind: str) -> dict:
    return {
        "kind": kind,
        "n_species": cfg.n_species,
        "grid": grid.spec.as_dict(),
        "mixture_hash": config_hash(cfg),
        "grid_hash": grid_hash(grid.spec),
        "ordering": "species-major, node-lexicographic (ix, iy, iz)",
    }


def save_field_csv(path: str, F: DistributionField, cfg: MixtureConfig,
                   grid: VelocityGrid) -> None:
    header = field_header(cfg, grid, F.kind)
    cols = {f"species_{i}": F.values[i] for i in range(F.n_species)}
    write_csv(path, cols, comments=[canonical_json(header).replace("\n", " ")])


def load_field_csv(path: str, kind: str = "density") -> DistributionField:
    cols = read_csv(path)
    values = np.stack([cols[k] for k in sorted(cols, key=lambda s: int(s.split("_")[1]))])
    return DistributionField(values=values, kind=kind)


def save_field_binary(path: str, F: DistributionField, cfg: MixtureConfig,
                      grid: VelocityGrid) -> None:
    """Raw float64 blocks, species-major; sidecar <path>.json carries the header."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(np.ascontiguousarray(F.values, dtype="<f8").tobytes())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    write_json(path + ".json", field_header(cfg, grid, F.kind)
               | {"shape": list(F.values.shape), "dtype": "<f8"})


def load_field_binary(path: str) -> DistributionField:
    with open(path + ".json") as fh:
        header = json.load(fh)
    raw = np.fromfile(path, dtype="<f8").reshape(header["shape"])
    return DistributionField(values=raw, kind=header["kind"])


def export_matrix_market(path: str, matrix, tag: str, cfg: MixtureConfig,
                         spec: GridSpec, extra: str = "") -> None:
    """Coordinate-format Matrix Market export with a provenance comment header."""
    comment = (f"tag={tag} mixture={config_hash(cfg)} "
               f"grid=n{spec.points_per_axis}_R{fmt_float(spec.radius)} {extra}")
    coo = sp.coo_matrix(matrix) if not sp.issparse(matrix) else sp.coo_matrix(matrix)
    scipy.io.mmwrite(path, coo, comment=comment, symmetry="general")
