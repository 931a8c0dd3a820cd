"""Command-line front end: simulate / fit / summarize / elicit / report-data.

Every subcommand writes a manifest.json recording inputs, parameters, hashes,
and seeds, so any output directory can be regenerated from it.
Exit codes: 0 success, 2 validation problem, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .dataio import (
    config_to_dict,
    load_config,
    load_dataset,
    load_graph,
    load_store,
    save_dataset,
    save_graph,
    save_store,
    write_manifest,
)
from .errors import StregionError, ValidationError
from .graph import grid_graph, partition_is_contiguous
from .likelihood import compute_sir, linear_predictor_mean
from .mcmc import run_chains
from .partition_prior import elicitation_grid, rho_autocorrelation
from .postprocess import summarize_store, waic
from .synthetic import builtin_scenarios, generate_dataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stregion",
        description="Seasonal regionalization of areal count data via tree-driven partitions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset from a named scenario")
    sim.add_argument("--scenario", required=True, help="scenario name (see --list via error)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--rows", type=int, default=7, help="grid rows for the built-in map")
    sim.add_argument("--cols", type=int, default=10, help="grid cols for the built-in map")
    sim.add_argument("--adjacency", default=None, help="use this adjacency CSV instead of a grid")

    fit = sub.add_parser("fit", help="run the Metropolis-within-Gibbs sampler")
    fit.add_argument("--data-dir", required=True)
    fit.add_argument("--config", required=True, help="sampler config JSON")
    fit.add_argument("--out", required=True)
    fit.add_argument("--seed", type=int, default=None, help="override the config seed")
    fit.add_argument("--chains", type=int, default=1)
    fit.add_argument("--workers", type=int, default=None, help="parallel chain workers")
    fit.add_argument(
        "--q-list", default=None,
        help="comma-separated q values; fits one model per value and compares WAIC",
    )
    fit.add_argument(
        "--no-disp-intercept", action="store_true",
        help="do not auto-prepend an intercept column to the dispersion design",
    )

    summ = sub.add_parser("summarize", help="posterior summaries from a chain directory")
    summ.add_argument("--run", required=True, help="chain output directory")
    summ.add_argument("--out", required=True)
    summ.add_argument("--level", type=float, default=0.95)
    summ.add_argument("--loss", choices=("vi", "binder"), default="vi")
    summ.add_argument("--restarts", type=int, default=4)
    summ.add_argument("--seed", type=int, default=0)

    eli = sub.add_parser("elicit", help="prior cluster-count grid for hyperparameter choice")
    eli.add_argument("--n", type=int, required=True, help="number of areas")
    eli.add_argument("--upsilon", required=True, help="comma-separated upsilon values")
    eli.add_argument("--kappa", required=True, help="comma-separated kappa values")
    eli.add_argument("--out", required=True, help="output CSV path")

    rep = sub.add_parser("report-data", help="plot-ready CSVs for the rendering frontend")
    rep.add_argument("--run", required=True, help="chain output directory")
    rep.add_argument("--data-dir", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--level", type=float, default=0.95)
    rep.add_argument("--loss", choices=("vi", "binder"), default="vi")
    rep.add_argument("--seed", type=int, default=0)
    return parser


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated number list, got {text!r}") from exc


def _cmd_simulate(args) -> int:
    if args.adjacency:
        graph = load_graph(args.adjacency)
    else:
        graph = grid_graph(args.rows, args.cols)
    catalog = builtin_scenarios(graph)
    if args.scenario not in catalog:
        raise ValidationError(
            f"unknown scenario {args.scenario!r}; available: {', '.join(sorted(catalog))}"
        )
    spec = catalog[args.scenario]
    rng = np.random.default_rng(args.seed)
    dataset, truth = generate_dataset(spec, rng)
    out = Path(args.out)
    save_dataset(dataset, out)
    save_graph(graph, out / "adjacency.csv")
    with open(out / "truth.json", "w") as fh:
        json.dump(truth.to_jsonable(), fh, indent=2)
    write_manifest(
        out, "simulate",
        params={"scenario": args.scenario, "rows": args.rows, "cols": args.cols},
        input_files=[args.adjacency] if args.adjacency else [],
        seeds=[args.seed],
    )
    print(f"wrote {spec.name} dataset to {out}")
    return 0


def _data_files(data_dir: Path) -> list[Path]:
    names = ("cases.csv", "covariates_mean.csv", "covariates_disp.csv", "seasons.csv", "adjacency.csv")
    return [data_dir / nm for nm in names if (data_dir / nm).exists()]


def _fit_one_model(dataset, graph, config, out_dir: Path, n_chains: int, workers) -> list:
    stores = run_chains(dataset, graph, config, n_chains=n_chains, n_workers=workers)
    for idx, store in enumerate(stores):
        save_store(store, out_dir / f"chain_{idx:02d}")
    return stores


def _cmd_fit(args) -> int:
    data_dir = Path(args.data_dir)
    dataset = load_dataset(data_dir, add_disp_intercept=not args.no_disp_intercept)
    graph = load_graph(data_dir / "adjacency.csv", n_areas=dataset.n_areas)
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out = Path(args.out)
    if args.q_list is None:
        _fit_one_model(dataset, graph, config, out, args.chains, args.workers)
        write_manifest(
            out, "fit",
            params={"config": config_to_dict(config), "chains": args.chains},
            input_files=_data_files(data_dir) + [Path(args.config)],
            seeds=[config.seed],
        )
        print(f"fitted {args.chains} chain(s) to {out}")
        return 0
    rows = []
    for q in [int(v) for v in _parse_float_list(args.q_list)]:
        q_config = dataclasses.replace(config, q=q, independence=(q == 0))
        q_dir = out / f"q_{q}"
        stores = _fit_one_model(dataset, graph, q_config, q_dir, args.chains, args.workers)
        for idx, store in enumerate(stores):
            rows.append(
                {
                    "q": q,
                    "chain": idx,
                    "waic_marginal": waic(store.loglik_marginal),
                    "waic_conditional": waic(store.loglik_conditional),
                }
            )
    table = pd.DataFrame(rows)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "waic_comparison.csv", index=False)
    best = table.loc[table["waic_marginal"].idxmin()]
    write_manifest(
        out, "fit",
        params={"config": config_to_dict(config), "chains": args.chains, "q_list": args.q_list},
        input_files=_data_files(data_dir) + [Path(args.config)],
        seeds=[config.seed],
    )
    print(table.to_string(index=False))
    print(f"lowest marginal WAIC at q={int(best['q'])}")
    return 0


def _cmd_summarize(args) -> int:
    store = load_store(args.run)
    summary = summarize_store(
        store, level=args.level, loss=args.loss, restarts=args.restarts, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    S = len(summary.point_partitions)
    n = store.labels.shape[2]
    rows = []
    for s, part in enumerate(summary.point_partitions):
        for area in range(n):
            rows.append({"season": s, "area": area, "cluster": int(part.labels[area])})
    pd.DataFrame(rows).to_csv(out / "partitions.csv", index=False)
    pd.DataFrame(
        summary.ri_matrix, columns=[f"season_{s}" for s in range(S)]
    ).to_csv(out / "ri_matrix.csv", index=False)
    flag_rows = []
    for area in range(summary.dispersion_flags.shape[0]):
        for s in range(summary.dispersion_flags.shape[1]):
            flag_rows.append(
                {"area": area, "season": s, "flag": bool(summary.dispersion_flags[area, s])}
            )
    pd.DataFrame(flag_rows).to_csv(out / "dispersion_flags.csv", index=False)
    with open(out / "waic.txt", "w") as fh:
        fh.write(f"waic_marginal {summary.waic_marginal:.6f}\n")
        fh.write(f"waic_conditional {summary.waic_conditional:.6f}\n")
    doc = {
        "scalars": summary.scalars,
        "rho": {k: np.asarray(v).tolist() for k, v in summary.rho.items()},
        "k": {k: np.asarray(v).tolist() for k, v in summary.k.items()},
        "waic_marginal": summary.waic_marginal,
        "waic_conditional": summary.waic_conditional,
        "waic_convention": "marginal_pig"
        if store.config.likelihood == "pig"
        else "poisson",
        "accept_rates": summary.accept_rates,
        "level": args.level,
        "loss": args.loss,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    write_manifest(
        out, "summarize",
        params={"level": args.level, "loss": args.loss, "restarts": args.restarts},
        input_files=[Path(args.run) / "meta.json"],
        seeds=[args.seed],
    )
    print(f"summary written to {out}")
    return 0


def _cmd_elicit(args) -> int:
    ups = _parse_float_list(args.upsilon)
    kap = _parse_float_list(args.kappa)
    rows = elicitation_grid(args.n, ups, kap)
    frame = pd.DataFrame(rows)
    frame["mean_rounded"] = frame["mean_clusters"].round().astype(int)
    frame["var_rounded"] = frame["var_clusters"].round().astype(int)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    print(f"elicitation grid ({len(ups)} x {len(kap)}) written to {out}")
    return 0


def _cmd_report_data(args) -> int:
    store = load_store(args.run)
    data_dir = Path(args.data_dir)
    dataset = load_dataset(data_dir)
    summary = summarize_store(store, level=args.level, loss=args.loss, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    S = len(summary.point_partitions)
    n = dataset.n_areas
    rows = []
    for s, part in enumerate(summary.point_partitions):
        for area in range(n):
            rows.append({"season": s, "area": area, "cluster": int(part.labels[area])})
    pd.DataFrame(rows).to_csv(out / "partitions.csv", index=False)

    total = store.rho.shape[1]
    lo, hi = np.quantile(store.rho, [(1 - args.level) / 2, 1 - (1 - args.level) / 2], axis=0)
    pd.DataFrame(
        {"season": np.arange(total), "mean": store.rho.mean(axis=0), "lo": lo, "hi": hi}
    ).to_csv(out / "rho_series.csv", index=False)

    trace = {"draw": np.arange(store.n_draws), "upsilon": store.upsilon, "kappa": store.kappa,
             "zeta": store.zeta, "w": store.w}
    for j in range(store.beta.shape[1]):
        trace[f"beta_{j + 1}"] = store.beta[:, j]
    for j in range(store.delta.shape[1]):
        trace[f"delta_{j}"] = store.delta[:, j]
    pd.DataFrame(trace).to_csv(out / "trace_scalars.csv", index=False)

    pd.DataFrame(
        summary.ri_matrix, columns=[f"season_{s}" for s in range(S)]
    ).to_csv(out / "ri_matrix.csv", index=False)

    flag_rows = []
    for area in range(summary.dispersion_flags.shape[0]):
        for s in range(summary.dispersion_flags.shape[1]):
            flag_rows.append(
                {"area": area, "season": s, "flag": bool(summary.dispersion_flags[area, s])}
            )
    pd.DataFrame(flag_rows).to_csv(out / "dispersion_flags.csv", index=False)

    # closed-form autocorrelation of the removal probabilities at posterior means
    q = store.config.q
    c_mean = store.c.mean(axis=0)
    ups_mean = float(store.upsilon.mean())
    kap_mean = float(store.kappa.mean())
    ac_rows = []
    for lag in range(1, max(S, 2)):
        if 1 + lag > total:
            break
        ac_rows.append(
            {
                "lag": lag,
                "corr": rho_autocorrelation(1, lag, q, ups_mean, kap_mean, c_mean),
            }
        )
    pd.DataFrame(ac_rows).to_csv(out / "autocorr.csv", index=False)

    # fitted weekly rates with credible bands, one row per (area, week)
    sow = dataset.season_of_week
    D = store.n_draws
    rate_draws = np.empty((D, n, dataset.n_weeks))
    for d in range(D):
        lam = linear_predictor_mean(dataset, store.beta[d]) * store.theta_area[d].T[:, sow]
        rate_draws[d] = dataset.offset * lam * store.z[d].T[:, sow]
    lo, hi = np.quantile(rate_draws, [(1 - args.level) / 2, 1 - (1 - args.level) / 2], axis=0)
    mean = rate_draws.mean(axis=0)
    fit_rows = {
        "area": np.repeat(np.arange(n), dataset.n_weeks),
        "week": np.tile(np.arange(dataset.n_weeks), n),
        "observed": dataset.y.ravel(),
        "fitted_mean": mean.ravel(),
        "lo": lo.ravel(),
        "hi": hi.ravel(),
    }
    pd.DataFrame(fit_rows).to_csv(out / "rate_fit.csv", index=False)

    # standardized incidence ratios with internally standardized expectations
    y_tot = dataset.y.sum(axis=1).astype(float)
    offset_tot = dataset.offset.sum(axis=1)
    expected = offset_tot / offset_tot.sum() * y_tot.sum()
    pd.DataFrame(
        {"area": np.arange(n), "observed": y_tot, "expected": expected,
         "sir": compute_sir(y_tot, expected)}
    ).to_csv(out / "sir.csv", index=False)

    # the loss-optimal partitions are unconstrained; record any contiguity breaks
    graph = load_graph(data_dir / "adjacency.csv", n_areas=n)
    contiguity = {
        str(s): bool(partition_is_contiguous(graph, part))
        for s, part in enumerate(summary.point_partitions)
    }
    with open(out / "contiguity_check.json", "w") as fh:
        json.dump({"point_partition_contiguous": contiguity}, fh, indent=2)

    # ship the adjacency so the rendering frontend needs nothing else
    adjacency_src = data_dir / "adjacency.csv"
    if adjacency_src.exists():
        (out / "adjacency.csv").write_bytes(adjacency_src.read_bytes())
    write_manifest(
        out, "report-data",
        params={"level": args.level, "loss": args.loss},
        input_files=[Path(args.run) / "meta.json"] + _data_files(data_dir),
        seeds=[args.seed],
    )
    print(f"report data written to {out}")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "summarize": _cmd_summarize,
    "elicit": _cmd_elicit,
    "report-data": _cmd_report_data,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StregionError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
