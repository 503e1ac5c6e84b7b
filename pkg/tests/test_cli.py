import csv
import os

import numpy as np
import pytest

from brownresnick import save_dataset
from brownresnick.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    load_samples_csv,
    main,
)
from conftest import make_synthetic_dataset


@pytest.fixture
def workspace(tmp_path):
    data = make_synthetic_dataset(n_years=12, n_sites=4, seed=30)
    stations = str(tmp_path / "stations.csv")
    minima = str(tmp_path / "minima.csv")
    save_dataset(data, stations, minima)
    return tmp_path, stations, minima, data


def write_config(tmp_path, name, options):
    path = str(tmp_path / name)
    with open(path, "w") as fh:
        for key, value in options.items():
            fh.write(f"{key} = {value}\n")
    return path


def test_simulate_br_draws(workspace):
    tmp_path, stations, minima, data = workspace
    cfg = write_config(tmp_path, "sim.cfg", {
        "kind": "br", "stations": stations, "lam": 300.0, "kappa": 1.0,
        "n_draws": 20, "write_partitions": "true",
    })
    out = str(tmp_path / "out_sim")
    assert main(["simulate", "--config", cfg, "--seed", "3", "--out-dir", out]) == EXIT_OK
    with open(os.path.join(out, "br_draws.csv")) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 21 and rows[0][1:] == list(data.sites.ids)
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert np.all(values > 0)
    assert os.path.exists(os.path.join(out, "br_partitions.csv"))
    assert os.path.exists(os.path.join(out, "simulate_config_resolved.txt"))


def test_decluster_writes_partitions(workspace):
    tmp_path, stations, minima, _ = workspace
    cfg = write_config(tmp_path, "dec.cfg", {
        "stations": stations, "minima": minima, "lag": 5,
    })
    out = str(tmp_path / "out_dec")
    assert main(["decluster", "--config", cfg, "--out-dir", out]) == EXIT_OK
    from brownresnick import load_partitions

    parts = load_partitions(os.path.join(out, "partitions.csv"))
    assert len(parts) == 12


def test_decluster_paper_example(tmp_path):
    with open(tmp_path / "stations.csv", "w") as fh:
        fh.write("id,x_km,y_km,elevation_m,relative_elevation_m,"
                 "ocean_proximity,lake_cover\n")
        for k, x in enumerate((0.0, 60.0, 120.0)):
            fh.write(f"S{k + 1},{x},0.0,100,0,0.1,0.1\n")
    with open(tmp_path / "minima.csv", "w") as fh:
        fh.write("winter,station,minimum,occ_days\n")
        for sid, day in (("S1", 1), ("S2", 4), ("S3", 7)):
            fh.write(f"1994,{sid},-38.0,{day}\n")
    cfg = write_config(tmp_path, "dec.cfg", {
        "stations": str(tmp_path / "stations.csv"),
        "minima": str(tmp_path / "minima.csv"),
        "lag": 5,
    })
    out = str(tmp_path / "out")
    assert main(["decluster", "--config", cfg, "--out-dir", out]) == EXIT_OK
    with open(os.path.join(out, "partitions.csv")) as fh:
        rows = list(csv.reader(fh))
    assert rows[1] == ["1994", "1,2,3"]


def test_fit_predict_diagnose_pipeline(workspace):
    tmp_path, stations, minima, data = workspace
    out_fit = str(tmp_path / "out_fit")
    cfg_fit = write_config(tmp_path, "fit.cfg", {
        "stations": stations, "minima": minima, "mode": "m3",
        "n_chains": 2, "n_iter": 30, "burn_in": 10, "n_samples": 128,
        "n_shifts": 4, "store_partitions_every": 5,
    })
    assert main(["fit", "--config", cfg_fit, "--seed", "5",
                 "--out-dir", out_fit]) == EXIT_OK
    samples_path = os.path.join(out_fit, "samples.csv")
    assert os.path.exists(samples_path)
    assert os.path.exists(os.path.join(out_fit, "summary.txt"))
    assert os.path.exists(os.path.join(out_fit, "partition_samples.csv"))
    post = load_samples_csv(samples_path)
    assert len(post.rows) == 2 * 20
    assert "sigma" in post.columns

    out_pred = str(tmp_path / "out_pred")
    cfg_pred = write_config(tmp_path, "pred.cfg", {
        "stations": stations, "minima": minima, "samples": samples_path,
        "years": "1980 2016", "grid_resolution": 120.0,
        "group_west": "1,2", "n_sims": 50,
    })
    assert main(["predict", "--config", cfg_pred, "--seed", "6",
                 "--out-dir", out_pred]) == EXIT_OK
    for name in ("mean_map_1980.csv", "mean_map_2016.csv",
                 "exceedance_1980.csv", "exceedance_2016.csv",
                 "group_west_samples.csv"):
        assert os.path.getsize(os.path.join(out_pred, name)) > 0

    out_diag = str(tmp_path / "out_diag")
    cfg_diag = write_config(tmp_path, "diag.cfg", {
        "stations": stations, "minima": minima, "samples": samples_path,
        "partition_samples": os.path.join(out_fit, "partition_samples.csv"),
        "n_boot": 30, "n_rep": 20, "group_east": "3,4",
    })
    assert main(["diagnose", "--config", cfg_diag, "--seed", "7",
                 "--out-dir", out_diag]) == EXIT_OK
    assert os.path.getsize(os.path.join(out_diag, "theta_bins.csv")) > 0
    assert os.path.exists(os.path.join(out_diag, "group_qq_east.csv"))


def test_missing_file_is_validation_error(tmp_path):
    cfg = write_config(tmp_path, "bad.cfg", {
        "stations": str(tmp_path / "nope.csv"),
        "minima": str(tmp_path / "nope2.csv"),
    })
    assert main(["decluster", "--config", cfg,
                 "--out-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_malformed_config_is_validation_error(tmp_path):
    path = tmp_path / "broken.cfg"
    path.write_text("this line has no equals sign\n")
    assert main(["decluster", "--config", str(path),
                 "--out-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_missing_required_key_is_validation_error(workspace):
    tmp_path, stations, minima, _ = workspace
    cfg = write_config(tmp_path, "sim.cfg", {"kind": "br", "stations": stations})
    assert main(["simulate", "--config", cfg,
                 "--out-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_numerical_failure_exit_code(workspace, monkeypatch):
    tmp_path, stations, minima, _ = workspace
    cfg = write_config(tmp_path, "fit.cfg", {
        "stations": stations, "minima": minima, "mode": "m2",
        "partitions": str(tmp_path / "none.csv"), "n_chains": 1,
        "n_iter": 4, "burn_in": 1,
    })
    # m2 without a partitions file is caught as validation
    assert main(["fit", "--config", cfg,
                 "--out-dir", str(tmp_path / "o")]) == EXIT_VALIDATION
    # a numerical error inside the run maps to the numerical exit code
    from brownresnick.errors import NonConvergence
    import brownresnick.cli as climod

    def boom(*args, **kwargs):
        raise NonConvergence("synthetic numerical failure")

    monkeypatch.setattr(climod, "run_chains", boom)
    cfg2 = write_config(tmp_path, "fit2.cfg", {
        "stations": stations, "minima": minima, "mode": "m3",
        "n_chains": 1, "n_iter": 4, "burn_in": 1,
    })
    assert main(["fit", "--config", cfg2,
                 "--out-dir", str(tmp_path / "o2")]) == EXIT_NUMERICAL
