"""Disk-cached ensemble production.

Heavy ensembles are expensive (hours at L = 10), so results are stored as
.npz files keyed by a hash of every input that affects the output bits:
model parameters, trajectory configuration, trajectory count and the chunk
size (which fixes the floating-point summation order).  A cache hit is
bitwise equivalent to recomputing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

from .model import ModelParams
from .observables import MomentAccumulator
from .trajectory import TrajectoryConfig, run_ensemble


def ensemble_key(
    params: ModelParams, config: TrajectoryConfig, n_traj: int, chunk_size: int = 16
) -> str:
    payload = {
        "params": asdict(params),
        "config": asdict(config),
        "n_traj": n_traj,
        "chunk_size": chunk_size,
    }
    blob = json.dumps(payload, sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_path(cache_dir, tag: str, key: str) -> Path:
    name = f"{tag}_{key[:16]}.npz" if tag else f"{key[:16]}.npz"
    return Path(cache_dir) / name


def run_ensemble_cached(
    params: ModelParams,
    config: TrajectoryConfig,
    n_traj: int,
    cache_dir,
    chunk_size: int = 16,
    tag: str = "",
    progress=None,
) -> MomentAccumulator:
    """Load the ensemble from cache_dir or compute and store it."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_path(cache_dir, tag, ensemble_key(params, config, n_traj, chunk_size))
    if path.exists():
        return MomentAccumulator.load(path)
    acc = run_ensemble(params, config, n_traj, chunk_size=chunk_size, progress=progress)
    tmp = path.parent / (path.stem + ".part.npz")  # readers never see partial files
    acc.save(tmp)
    tmp.rename(path)
    return acc
