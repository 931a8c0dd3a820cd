"""Node positions for area maps: user coordinates or a seeded force layout."""
from __future__ import annotations

import numpy as np
import pandas as pd


def load_coordinates(path, n_areas: int) -> np.ndarray:
    df = pd.read_csv(path)
    for col in ("area", "x", "y"):
        if col not in df.columns:
            raise ValueError(f"coordinate file is missing column '{col}'")
    coords = np.zeros((n_areas, 2))
    coords[df["area"].to_numpy(dtype=int)] = df[["x", "y"]].to_numpy(dtype=float)
    return coords


def force_layout(n_areas: int, edges: np.ndarray, seed: int = 0, iterations: int = 150) -> np.ndarray:
    """Fruchterman-Reingold style layout, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1.0, 1.0, size=(n_areas, 2))
    if n_areas == 1:
        return pos
    k = np.sqrt(4.0 / n_areas)  # target spacing in a [-1,1]^2 box
    temperature = 0.3
    cooling = temperature / iterations
    for _ in range(iterations):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(delta, axis=2)
        np.fill_diagonal(dist, 1.0)
        repulse = (k**2 / dist**2)[:, :, None] * delta / dist[:, :, None]
        disp = repulse.sum(axis=1)
        for a, b in edges:
            d = pos[a] - pos[b]
            norm = max(np.linalg.norm(d), 1e-9)
            pull = (norm / k) * d / norm
            disp[a] -= pull
            disp[b] += pull
        lengths = np.maximum(np.linalg.norm(disp, axis=1), 1e-9)
        step = np.minimum(lengths, temperature)
        pos += disp / lengths[:, None] * step[:, None]
        temperature = max(temperature - cooling, 1e-3)
    pos -= pos.mean(axis=0)
    scale = np.abs(pos).max()
    return pos / scale if scale > 0 else pos
