"""File formats: dataset CSVs, adjacency, chain output directories, manifests.

All ids in files are 0-based.  The pointwise log-likelihood matrix is stored
as `loglik.bin`: an 8-byte magic, two little-endian uint32 counts (draws,
observations), then row-major float64; observation index is
area * n_weeks + week.
"""
from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import ValidationError
from .graph import SpatialGraph
from .likelihood import Dataset
from .mcmc import SampleStore, SamplerConfig

LOGLIK_MAGIC = b"STRGLLK1"


# -- graph and dataset ------------------------------------------------------

def save_graph(graph: SpatialGraph, path) -> None:
    pd.DataFrame(graph.edges, columns=["area_a", "area_b"]).to_csv(path, index=False)


def load_graph(path, n_areas: int | None = None) -> SpatialGraph:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"adjacency file not found: {path}")
    df = pd.read_csv(path)
    if list(df.columns[:2]) != ["area_a", "area_b"]:
        raise ValidationError("adjacency CSV must have header area_a,area_b")
    pairs = df[["area_a", "area_b"]].to_numpy(dtype=np.int64)
    n = int(pairs.max()) + 1 if n_areas is None else n_areas
    return SpatialGraph.from_edges(n, pairs)


def save_dataset(dataset: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n, T = dataset.n_areas, dataset.n_weeks
    area = np.repeat(np.arange(n), T)
    week = np.tile(np.arange(T), n)
    pd.DataFrame(
        {"area": area, "week": week, "y": dataset.y.ravel(), "offset": dataset.offset.ravel()}
    ).to_csv(out / "cases.csv", index=False)
    if dataset.p_mean:
        cols = {f"x{j + 1}": dataset.X[:, :, j].ravel() for j in range(dataset.p_mean)}
        pd.DataFrame({"area": area, "week": week, **cols}).to_csv(
            out / "covariates_mean.csv", index=False
        )
    if dataset.p_disp:
        S = dataset.n_seasons
        a2 = np.repeat(np.arange(n), S)
        s2 = np.tile(np.arange(S), n)
        cols = {f"v{j + 1}": dataset.V[:, :, j].ravel() for j in range(dataset.p_disp)}
        pd.DataFrame({"area": a2, "season": s2, **cols}).to_csv(
            out / "covariates_disp.csv", index=False
        )
    pd.DataFrame(
        {"week": np.arange(T), "season": dataset.season_of_week}
    ).to_csv(out / "seasons.csv", index=False)


def load_dataset(data_dir, add_disp_intercept: bool = True) -> Dataset:
    """Read the dataset CSV family from a directory.

    covariates_mean.csv and covariates_disp.csv are optional; a missing
    dispersion design yields an intercept-only column (PIG fits need one).
    add_disp_intercept prepends a column of ones when none is present.
    """
    data_dir = Path(data_dir)
    cases_path = data_dir / "cases.csv"
    if not cases_path.exists():
        raise ValidationError(f"data file not found: {cases_path}")
    cases = pd.read_csv(cases_path)
    for col in ("area", "week", "y", "offset"):
        if col not in cases.columns:
            raise ValidationError(f"cases.csv is missing column '{col}'")
    n = int(cases["area"].max()) + 1
    T = int(cases["week"].max()) + 1
    if len(cases) != n * T:
        raise ValidationError("cases.csv must have one row per (area, week)")
    y = np.zeros((n, T), dtype=np.int64)
    offset = np.zeros((n, T))
    y[cases["area"], cases["week"]] = cases["y"]
    offset[cases["area"], cases["week"]] = cases["offset"]

    seasons_path = data_dir / "seasons.csv"
    if not seasons_path.exists():
        raise ValidationError(f"data file not found: {seasons_path}")
    seasons = pd.read_csv(seasons_path).sort_values("week")
    if seasons["week"].tolist() != list(range(T)):
        raise ValidationError("seasons.csv must cover every week exactly once")
    season_of_week = seasons["season"].to_numpy(dtype=np.int64)
    S = int(season_of_week.max()) + 1

    mean_path = data_dir / "covariates_mean.csv"
    if mean_path.exists():
        dfx = pd.read_csv(mean_path)
        xcols = [c for c in dfx.columns if c not in ("area", "week")]
        X = np.zeros((n, T, len(xcols)))
        for j, col in enumerate(xcols):
            X[dfx["area"], dfx["week"], j] = dfx[col]
    else:
        X = np.zeros((n, T, 0))

    disp_path = data_dir / "covariates_disp.csv"
    if disp_path.exists():
        dfv = pd.read_csv(disp_path)
        vcols = [c for c in dfv.columns if c not in ("area", "season")]
        V = np.zeros((n, S, len(vcols)))
        for j, col in enumerate(vcols):
            V[dfv["area"], dfv["season"], j] = dfv[col]
        has_intercept = any(np.allclose(V[:, :, j], 1.0) for j in range(V.shape[2]))
        if add_disp_intercept and not has_intercept:
            V = np.concatenate([np.ones((n, S, 1)), V], axis=2)
    else:
        V = np.ones((n, S, 1))
    return Dataset(y=y, offset=offset, X=X, V=V, season_of_week=season_of_week)


def save_partition_csv(labels: np.ndarray, path) -> None:
    pd.DataFrame({"area": np.arange(labels.size), "cluster": labels}).to_csv(path, index=False)


# -- pointwise log-likelihood binary -----------------------------------------

def write_loglik_bin(path, loglik: np.ndarray) -> None:
    arr = np.ascontiguousarray(loglik, dtype="<f8")
    n_draws, n_obs = arr.shape
    with open(path, "wb") as fh:
        fh.write(LOGLIK_MAGIC)
        fh.write(struct.pack("<II", n_draws, n_obs))
        fh.write(arr.tobytes())


def read_loglik_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != LOGLIK_MAGIC:
            raise ValidationError(f"{path} is not a log-likelihood file")
        n_draws, n_obs = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n_draws * n_obs:
        raise ValidationError(f"{path} is truncated")
    return data.reshape(n_draws, n_obs)


# -- sampler config -----------------------------------------------------------

def config_from_dict(raw: dict) -> SamplerConfig:
    known = set(SamplerConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    cleaned = {
        key: (np.asarray(val, dtype=float) if isinstance(val, list) else val)
        for key, val in raw.items()
    }
    return SamplerConfig(**cleaned)


def load_config(path) -> SamplerConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_to_dict(config: SamplerConfig) -> dict:
    out = {}
    for key, val in asdict(config).items():
        out[key] = val.tolist() if isinstance(val, np.ndarray) else val
    return out


# -- chain output directories --------------------------------------------------

def _wide(prefix: str, arr: np.ndarray, start: int = 1) -> pd.DataFrame:
    return pd.DataFrame(arr, columns=[f"{prefix}_{start + j}" for j in range(arr.shape[1])])


def save_store(store: SampleStore, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    D = store.n_draws
    draw_col = pd.DataFrame({"draw": np.arange(D)})
    pd.concat(
        [draw_col, pd.DataFrame({"upsilon": store.upsilon, "kappa": store.kappa,
                                 "zeta": store.zeta, "w": store.w})],
        axis=1,
    ).to_csv(out / "samples_scalars.csv", index=False)
    if store.beta.shape[1]:
        pd.concat([draw_col, _wide("beta", store.beta)], axis=1).to_csv(
            out / "samples_beta.csv", index=False
        )
    if store.delta.shape[1]:
        pd.concat([draw_col, _wide("delta", store.delta, start=0)], axis=1).to_csv(
            out / "samples_delta.csv", index=False
        )
    pd.concat([draw_col, _wide("rho", store.rho)], axis=1).to_csv(
        out / "samples_rho.csv", index=False
    )
    pd.concat([draw_col, _wide("c", store.c), _wide("u", store.u)], axis=1).to_csv(
        out / "samples_latents.csv", index=False
    )
    pd.concat([draw_col, _wide("k", store.k)], axis=1).to_csv(
        out / "samples_k.csv", index=False
    )
    n = store.labels.shape[2]
    S = store.labels.shape[1]
    for name, arr in (
        ("samples_partition.csv", store.labels),
        ("samples_theta.csv", store.theta_area),
        ("samples_z.csv", store.z),
    ):
        flat = arr.reshape(D * S, n) if S else np.zeros((0, n))
        frame = pd.DataFrame(flat, columns=[f"area_{j}" for j in range(n)])
        frame.insert(0, "season", np.tile(np.arange(S), D))
        frame.insert(0, "draw", np.repeat(np.arange(D), S))
        frame.to_csv(out / name, index=False)
    write_loglik_bin(out / "loglik.bin", store.loglik_marginal)
    if store.config.likelihood == "pig":
        write_loglik_bin(out / "loglik_conditional.bin", store.loglik_conditional)
    meta = {
        "engine_version": __version__,
        "config": config_to_dict(store.config),
        "n_draws": D,
        "n_seasons": S,
        "n_areas": n,
        "total_seasons": store.rho.shape[1],
        "loglik_convention": "marginal_pig" if store.config.likelihood == "pig" else "poisson",
        "accept_rates": store.accept_rates,
        "proposal_scales": store.proposal_scales,
        "wall_time_seconds": store.wall_time,
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)


def load_store(run_dir) -> SampleStore:
    run = Path(run_dir)
    meta_path = run / "meta.json"
    if not meta_path.exists():
        raise ValidationError(f"not a chain directory (missing {meta_path})")
    with open(meta_path) as fh:
        meta = json.load(fh)
    config = config_from_dict(meta["config"])
    scalars = pd.read_csv(run / "samples_scalars.csv")
    D = len(scalars)
    S = meta["n_seasons"]
    n = meta["n_areas"]

    def wide(path, prefix, total):
        if not Path(path).exists():
            return np.zeros((D, 0))
        df = pd.read_csv(path)
        cols = [c for c in df.columns if c.startswith(prefix + "_")]
        return df[cols[:total] if total else cols].to_numpy()

    rho = wide(run / "samples_rho.csv", "rho", None)
    latents = pd.read_csv(run / "samples_latents.csv")
    c_cols = [c for c in latents.columns if c.startswith("c_")]
    u_cols = [c for c in latents.columns if c.startswith("u_")]
    k = wide(run / "samples_k.csv", "k", None).astype(np.int64)

    def seasonal(path):
        df = pd.read_csv(path)
        arr = df[[f"area_{j}" for j in range(n)]].to_numpy()
        return arr.reshape(D, S, n) if S else np.zeros((D, 0, n))

    labels = seasonal(run / "samples_partition.csv").astype(np.int32)
    theta_area = seasonal(run / "samples_theta.csv").astype(float)
    z = seasonal(run / "samples_z.csv").astype(float)
    loglik_marginal = read_loglik_bin(run / "loglik.bin")
    cond_path = run / "loglik_conditional.bin"
    loglik_conditional = read_loglik_bin(cond_path) if cond_path.exists() else loglik_marginal.copy()
    return SampleStore(
        config=config,
        n_draws=D,
        upsilon=scalars["upsilon"].to_numpy(),
        kappa=scalars["kappa"].to_numpy(),
        zeta=scalars["zeta"].to_numpy(),
        w=scalars["w"].to_numpy(),
        beta=wide(run / "samples_beta.csv", "beta", None),
        delta=wide(run / "samples_delta.csv", "delta", None),
        rho=rho,
        u=latents[u_cols].to_numpy(dtype=np.int64),
        c=latents[c_cols].to_numpy(dtype=np.int64),
        k=k,
        labels=labels,
        theta_area=theta_area,
        z=z,
        loglik_marginal=loglik_marginal,
        loglik_conditional=loglik_conditional,
        accept_rates=meta.get("accept_rates", {}),
        proposal_scales=meta.get("proposal_scales", {}),
        wall_time=meta.get("wall_time_seconds", 0.0),
    )


# -- run manifests ---------------------------------------------------------------

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_sha256(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(Path(p) for p in paths):
        h.update(p.name.encode())
        h.update(bytes.fromhex(file_sha256(p)))
    return h.hexdigest()


def write_manifest(out_dir, subcommand: str, params: dict, input_files=(), seeds=()) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "engine_version": __version__,
        "params": params,
        "input_hash": tree_sha256(input_files) if input_files else None,
        "inputs": [str(p) for p in input_files],
        "seeds": list(seeds),
        "created_unix": time.time(),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
