import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from stregion.cli import cli_main
from stregion.dataio import (
    load_dataset,
    load_graph,
    load_store,
    read_loglik_bin,
    save_dataset,
    save_graph,
    write_loglik_bin,
)
from stregion.errors import ValidationError
from stregion.graph import grid_graph
from stregion.likelihood import Dataset
from stregion.mcmc import SamplerConfig, run_chain
from stregion.synthetic import generate_dataset, sim1_scenario


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = cli_main(
        [
            "simulate", "--scenario", "sim1-scenario1-over", "--out", str(out),
            "--seed", "3", "--rows", "3", "--cols", "4",
        ]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    cfg = {
        "n_iter": 300, "burn_in": 0.5, "thin": 3, "q": 1, "seed": 11,
        "likelihood": "pig",
    }
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    code = cli_main(
        ["fit", "--data-dir", str(sim_dir), "--config", str(cfg_path), "--out", str(out)]
    )
    assert code == 0
    return out


class TestLoglikBin:
    def test_round_trip(self, tmp_path):
        arr = np.random.default_rng(0).normal(size=(7, 13))
        path = tmp_path / "ll.bin"
        write_loglik_bin(path, arr)
        assert path.stat().st_size == 16 + 7 * 13 * 8
        back = read_loglik_bin(path)
        assert np.array_equal(back, arr)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 24)
        with pytest.raises(ValidationError):
            read_loglik_bin(path)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        spec = sim1_scenario(1, True, graph=grid_graph(3, 3), n_seasons=2)
        ds, _ = generate_dataset(spec, np.random.default_rng(5))
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path)
        assert np.array_equal(back.y, ds.y)
        assert np.allclose(back.offset, ds.offset)
        assert np.allclose(back.X, ds.X)
        assert np.allclose(back.V, ds.V)
        assert np.array_equal(back.season_of_week, ds.season_of_week)

    def test_intercept_auto_prepended(self, tmp_path):
        n, T, S = 2, 4, 2
        ds = Dataset(
            y=np.ones((n, T), dtype=np.int64),
            offset=np.ones((n, T)),
            X=np.zeros((n, T, 0)),
            V=np.random.default_rng(0).normal(size=(n, S, 1)) + 3.0,
            season_of_week=np.repeat(np.arange(S), 2),
        )
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path, add_disp_intercept=True)
        assert back.p_disp == 2
        assert np.allclose(back.V[:, :, 0], 1.0)
        raw = load_dataset(tmp_path, add_disp_intercept=False)
        assert raw.p_disp == 1

    def test_missing_file_is_validation_error(self, tmp_path):
        with pytest.raises(ValidationError):
            load_dataset(tmp_path / "nope")

    def test_graph_round_trip(self, tmp_path):
        g = grid_graph(3, 4)
        save_graph(g, tmp_path / "adjacency.csv")
        back = load_graph(tmp_path / "adjacency.csv")
        assert back.n_areas == 12
        assert np.array_equal(back.edges, g.edges)


class TestStoreIO:
    def test_store_round_trip(self, tmp_path):
        spec = sim1_scenario(1, True, graph=grid_graph(3, 3), n_seasons=2)
        ds, _ = generate_dataset(spec, np.random.default_rng(2))
        cfg = SamplerConfig(n_iter=120, burn_in=0.5, thin=2, q=1, seed=9)
        store = run_chain(ds, spec.graph, cfg)
        from stregion.dataio import save_store

        save_store(store, tmp_path / "chain_00")
        back = load_store(tmp_path / "chain_00")
        assert back.n_draws == store.n_draws
        assert np.allclose(back.rho, store.rho)
        assert np.array_equal(back.labels, store.labels)
        assert np.allclose(back.loglik_marginal, store.loglik_marginal)
        assert np.allclose(back.theta_area, store.theta_area)
        assert back.config.q == 1


class TestCliPipeline:
    def test_simulate_outputs(self, sim_dir):
        for name in ("cases.csv", "covariates_mean.csv", "covariates_disp.csv",
                     "seasons.csv", "adjacency.csv", "truth.json", "manifest.json"):
            assert (sim_dir / name).exists(), name
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert len(truth["labels"]) == 12

    def test_unknown_scenario_exits_2(self, tmp_path):
        assert cli_main(["simulate", "--scenario", "nope", "--out", str(tmp_path)]) == 2

    def test_missing_data_exits_2(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{}")
        code = cli_main(
            ["fit", "--data-dir", str(tmp_path / "absent"), "--config", str(cfg),
             "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_unknown_flag_exits_2(self):
        assert cli_main(["fit", "--frobnicate"]) == 2

    def test_fit_outputs(self, fit_dir):
        chain = fit_dir / "chain_00"
        for name in ("samples_scalars.csv", "samples_rho.csv", "samples_partition.csv",
                     "loglik.bin", "loglik_conditional.bin", "meta.json"):
            assert (chain / name).exists(), name
        meta = json.loads((chain / "meta.json").read_text())
        assert meta["n_draws"] == 50
        assert meta["loglik_convention"] == "marginal_pig"

    def test_fit_reproducible_bit_exact(self, sim_dir, tmp_path):
        cfg = {"n_iter": 120, "burn_in": 0.5, "thin": 2, "q": 0, "seed": 5,
               "likelihood": "poisson"}
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cfg_path = tmp_path / f"cfg_{tag}.json"
            cfg_path.write_text(json.dumps(cfg))
            assert cli_main(
                ["fit", "--data-dir", str(sim_dir), "--config", str(cfg_path),
                 "--out", str(out)]
            ) == 0
            outs.append(out)
        a = (outs[0] / "chain_00" / "samples_rho.csv").read_bytes()
        b = (outs[1] / "chain_00" / "samples_rho.csv").read_bytes()
        assert a == b
        assert (outs[0] / "chain_00" / "loglik.bin").read_bytes() == (
            outs[1] / "chain_00" / "loglik.bin"
        ).read_bytes()

    def test_summarize_outputs(self, fit_dir, tmp_path):
        out = tmp_path / "summary"
        code = cli_main(
            ["summarize", "--run", str(fit_dir / "chain_00"), "--out", str(out)]
        )
        assert code == 0
        for name in ("summary.json", "partitions.csv", "ri_matrix.csv",
                     "dispersion_flags.csv", "waic.txt", "manifest.json"):
            assert (out / name).exists(), name
        doc = json.loads((out / "summary.json").read_text())
        assert "upsilon" in doc["scalars"]
        assert doc["waic_convention"] == "marginal_pig"
        parts = pd.read_csv(out / "partitions.csv")
        assert set(parts.columns) == {"season", "area", "cluster"}

    def test_report_data_outputs(self, sim_dir, fit_dir, tmp_path):
        out = tmp_path / "report"
        code = cli_main(
            ["report-data", "--run", str(fit_dir / "chain_00"),
             "--data-dir", str(sim_dir), "--out", str(out)]
        )
        assert code == 0
        expected = {
            "partitions.csv": {"season", "area", "cluster"},
            "rho_series.csv": {"season", "mean", "lo", "hi"},
            "trace_scalars.csv": None,
            "ri_matrix.csv": None,
            "dispersion_flags.csv": {"area", "season", "flag"},
            "autocorr.csv": {"lag", "corr"},
            "rate_fit.csv": {"area", "week", "observed", "fitted_mean", "lo", "hi"},
            "adjacency.csv": {"area_a", "area_b"},
            "sir.csv": {"area", "observed", "expected", "sir"},
        }
        for name, cols in expected.items():
            assert (out / name).exists(), name
            if cols:
                assert set(pd.read_csv(out / name).columns) == cols, name
        rho = pd.read_csv(out / "rho_series.csv")
        assert np.all(rho["lo"] <= rho["mean"]) and np.all(rho["mean"] <= rho["hi"])
        sir = pd.read_csv(out / "sir.csv")
        assert sir["sir"].to_numpy() == pytest.approx(
            (sir["observed"] / sir["expected"]).to_numpy()
        )
        contig = json.loads((out / "contiguity_check.json").read_text())
        assert set(contig["point_partition_contiguous"]) == {str(s) for s in range(12)}

    def test_q_scan_emits_waic_table(self, sim_dir, tmp_path):
        out = tmp_path / "scan"
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"n_iter": 150, "burn_in": 0.5, "thin": 3, "seed": 7, "likelihood": "pig"}
        ))
        code = cli_main(
            ["fit", "--data-dir", str(sim_dir), "--config", str(cfg_path),
             "--out", str(out), "--q-list", "0,1"]
        )
        assert code == 0
        table = pd.read_csv(out / "waic_comparison.csv")
        assert sorted(table["q"].tolist()) == [0, 1]
        assert (out / "q_0" / "chain_00" / "meta.json").exists()
        assert (out / "q_1" / "chain_00" / "meta.json").exists()

    def test_elicit_grid(self, tmp_path):
        out = tmp_path / "grid.csv"
        code = cli_main(
            ["elicit", "--n", "70", "--upsilon", "10,5", "--kappa", "100,10", "--out", str(out)]
        )
        assert code == 0
        grid = pd.read_csv(out)
        assert len(grid) == 4
        row = grid[(grid["upsilon"] == 10) & (grid["kappa"] == 100)].iloc[0]
        assert int(row["mean_rounded"]) == 7
        assert int(row["var_rounded"]) == 9
