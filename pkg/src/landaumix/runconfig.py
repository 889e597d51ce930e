"""Run configuration: one TOML file with nested tables, one block per command."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import GridSpec, default_radius
from .mixture import MixtureConfig, mixture

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

THREADS_ENV = "LANDAUMIX_THREADS"

DEFAULTS = {
    "gap": {"selector": "full", "metric": "both", "certify_samples": 1000,
            "method": "auto"},
    "relax": {"recipe": "drift_split", "drift": 0.2, "epsilon": 1e-3,
              "t_end": 8.0, "record_every": 4, "dt_safety": 2.0},
    "modes": {"k_list": [0, 1, 2, 3], "t_end": 6.0, "n_steps": 400,
              "record_every": 2, "f0_scale": 1.0},
    "kcompact": {"cutoffs": [2, 4, 8, 16]},
    "invariants": {"samples": 20},
    "sweep": {"gammas": [-2.0, -1.0, 0.0, 1.0], "mass_ratios": [1.0, 2.0, 10.0],
              "species_counts": [1, 2], "points_per_axis": 8},
}


@dataclass
class RunConfig:
    mixture: MixtureConfig
    grid: GridSpec
    seed: int = 1234
    output_dir: str = "out"
    threads: int = 1
    blocks: dict = field(default_factory=dict)

    def block(self, name: str) -> dict:
        merged = dict(DEFAULTS.get(name, {}))
        merged.update(self.blocks.get(name, {}))
        return merged

    def as_dict(self) -> dict:
        return {
            "mixture": self.mixture.as_dict(),
            "grid": self.grid.as_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "blocks": self.blocks,
        }


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def load_config(path: str, seed: int | None = None, output_dir: str | None = None,
                threads: int | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration; CLI flags override file values."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    return config_from_dict(raw, seed=seed, output_dir=output_dir, threads=threads)


def config_from_dict(raw: dict, seed: int | None = None, output_dir: str | None = None,
                     threads: int | None = None) -> RunConfig:
    mix_tbl = raw.get("mixture")
    if mix_tbl is None:
        raise ConfigError("config needs a [mixture] table")
    try:
        cfg = mixture(
            masses=mix_tbl["masses"],
            densities=mix_tbl.get("densities"),
            gamma=mix_tbl.get("gamma", 0.0),
            interaction=mix_tbl.get("interaction"),
            kT=mix_tbl.get("kT", 1.0),
            drift=mix_tbl.get("drift", (0.0, 0.0, 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"[mixture] missing key {exc}") from exc

    grid_tbl = raw.get("grid", {})
    n = int(grid_tbl.get("points_per_axis", 12))
    radius = grid_tbl.get("radius")
    if radius is None:
        radius = default_radius(cfg.masses, cfg.kT)
    spec = GridSpec(points_per_axis=n, radius=float(radius))

    known = {"mixture", "grid", "seed", "output_dir", "threads", *DEFAULTS}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config tables/keys: {sorted(unknown)}")
    blocks = {k: dict(raw[k]) for k in DEFAULTS if k in raw}

    return RunConfig(
        mixture=cfg,
        grid=spec,
        seed=int(seed if seed is not None else raw.get("seed", 1234)),
        output_dir=str(output_dir if output_dir is not None else raw.get("output_dir", "out")),
        threads=int(threads if threads is not None else raw.get("threads", default_threads())),
        blocks=blocks,
    )


def sweep_points(run: RunConfig):
    """Cross product of the sweep block; yields (label, MixtureConfig, GridSpec)."""
    blk = run.block("sweep")
    n = int(blk["points_per_axis"])
    for gamma in blk["gammas"]:
        for ratio in blk["mass_ratios"]:
            for n_sp in blk["species_counts"]:
                masses = [1.0] if n_sp == 1 else [1.0] + [float(ratio)] * (n_sp - 1)
                cfg = mixture(masses, gamma=float(gamma), kT=run.mixture.kT)
                spec = GridSpec(points_per_axis=n,
                                radius=default_radius(cfg.masses, cfg.kT))
                label = f"g{gamma:+.0f}_r{ratio:g}_N{n_sp}"
                yield label, cfg, spec
