import json

import numpy as np
import pytest

import sourceattrib as sa
from sourceattrib.cli import main, read_config
from sourceattrib.engine import Chain
from sourceattrib.io import (ingest, read_counts_csv, write_counts_csv,
                             write_prevalence_csv)
from sourceattrib.synthgen import default_true_params, simulate


@pytest.fixture()
def csv_pair(tmp_path, small_dataset):
    data, prevalence, _ = small_dataset
    dpath, ppath = tmp_path / "data.csv", tmp_path / "prev.csv"
    write_counts_csv(data, dpath)
    write_prevalence_csv(prevalence, ppath)
    return str(dpath), str(ppath)


# -- ingestion ---------------------------------------------------------------

def test_roundtrip_identity(csv_pair, small_dataset):
    data, prevalence, _ = small_dataset
    back, kback = ingest(*csv_pair)
    assert back.types == data.types and back.sources == data.sources
    assert np.array_equal(back.y, data.y)
    assert np.array_equal(back.x, data.x)
    assert np.array_equal(kback.k, prevalence.k)  # 17 digits round-trip


def test_negative_count_names_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("Human,S1,Type,Time,Location\n"
                    "1,2,a,1,A\n"
                    "-3,2,b,1,A\n")
    with pytest.raises(sa.ValidationError, match="negative count.*Human.*row 3"):
        read_counts_csv(path)


def test_non_integer_count_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("Human,S1,Type,Time,Location\n1.5,2,a,1,A\n")
    with pytest.raises(sa.ValidationError, match="non-integer"):
        read_counts_csv(path)


def test_duplicate_row_rejected(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("Human,S1,Type,Time,Location\n"
                    "1,2,a,1,A\n"
                    "1,2,a,1,A\n")
    with pytest.raises(sa.ValidationError, match="duplicate"):
        read_counts_csv(path)


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "col.csv"
    path.write_text("Human,S1,Type,Time\n1,2,a,1\n")
    with pytest.raises(sa.ValidationError, match="Location"):
        read_counts_csv(path)


def test_source_counts_must_match_across_locations(tmp_path):
    path = tmp_path / "loc.csv"
    path.write_text("Human,S1,Type,Time,Location\n"
                    "1,2,a,1,A\n"
                    "1,3,a,1,B\n")
    with pytest.raises(sa.ValidationError, match="differ across locations"):
        read_counts_csv(path)


def test_unknown_source_in_prevalence(tmp_path, csv_pair):
    dpath, _ = csv_pair
    bad = tmp_path / "prev_bad.csv"
    bad.write_text("Value,Source,Time\n0.5,NoSuchSource,1\n")
    with pytest.raises(sa.ValidationError, match="NoSuchSource"):
        ingest(dpath, str(bad))


# -- config grammar ----------------------------------------------------------

def test_config_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# a comment\n"
                   "seed = 5\n"
                   "n_iter = 100   # trailing comment\n"
                   "fixed_r = true\n"
                   "a_theta = 0.01\n"
                   "\n")
    values = read_config(cfg)
    assert values == {"seed": 5, "n_iter": 100, "fixed_r": True,
                      "a_theta": 0.01}


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("wibble = 3\n")
    with pytest.raises(sa.ValidationError, match="wibble"):
        read_config(cfg)


# -- CLI contract ------------------------------------------------------------

def test_cli_missing_data_file_exit_2(tmp_path, capsys):
    code = main(["fit", "--data", str(tmp_path / "nothere.csv"),
                 "--prevalence", str(tmp_path / "alsonot.csv"),
                 "--out", str(tmp_path), "--seed", "1"])
    assert code == 2
    assert "nothere.csv" in capsys.readouterr().err


def test_cli_spin_exit_2(tmp_path, capsys):
    code = main(["summary", "--chain", "x.bin", "--method", "SPIn"])
    assert code == 2
    assert "not implemented" in capsys.readouterr().err


def test_cli_fit_deterministic_and_manifest(tmp_path, csv_pair):
    dpath, ppath = csv_pair
    args = ["fit", "--data", dpath, "--prevalence", ppath, "--seed", "17",
            "--n-iter", "5", "--burn-in", "10", "--thin", "1"]
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    b1 = (out1 / "chain.bin").read_bytes()
    b2 = (out2 / "chain.bin").read_bytes()
    assert b1 == b2
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["seeds"] == [17]
    assert manifest["fit_params"] == {"n_iter": 5, "burn_in": 10, "thin": 1}
    assert "sha256" in manifest["inputs"]["data"]
    assert (out1 / "acceptance.csv").exists()


def test_cli_pipeline_commands(tmp_path, csv_pair):
    dpath, ppath = csv_pair
    out = tmp_path / "fit"
    assert main(["fit", "--data", dpath, "--prevalence", ppath,
                 "--out", str(out), "--seed", "3", "--n-iter", "6",
                 "--thin", "1"]) == 0
    chain = str(out / "chain.bin")
    assert main(["summary", "--chain", chain,
                 "--out", str(tmp_path / "summary.csv")]) == 0
    assert (tmp_path / "summary.csv").exists()
    assert main(["extract", "--chain", chain, "--out", str(tmp_path / "csv"),
                 "--params", "q"]) == 0
    assert (tmp_path / "csv" / "q.csv").exists()
    assert main(["heatmap", "--chain", chain,
                 "--out", str(tmp_path / "hm")]) == 0
    assert (tmp_path / "hm" / "heatmap.svg").exists()
    assert (tmp_path / "hm" / "dendrogram.nwk").exists()
    assert main(["dutch", "--data", dpath, "--prevalence", ppath,
                 "--seed", "4", "-B", "20",
                 "--out", str(tmp_path / "dutch.csv")]) == 0
    assert main(["acceptance", "--chain", chain,
                 "--out", str(tmp_path / "acc.csv")]) == 0
    assert main(["append", "--chain", chain, "--data", dpath,
                 "--prevalence", ppath, "--extra", "3",
                 "--out", str(tmp_path / "longer.bin")]) == 0
    longer = Chain.load(tmp_path / "longer.bin")
    assert longer.n_samples == 9


def test_cli_simulate_roundtrip(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out), "--seed", "8",
                 "--n-types", "6", "--n-sources", "2",
                 "--total-samples", "50"]) == 0
    data, prevalence = ingest(str(out / "data.csv"),
                              str(out / "prevalence.csv"))
    assert data.shape == (6, 2, 2, 2)
    assert (out / "truth.csv").exists()


def test_cli_config_file_with_flag_override(tmp_path, csv_pair):
    dpath, ppath = csv_pair
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"data = {dpath}\nprevalence = {ppath}\n"
                   "seed = 2\nn_iter = 4\nthin = 1\n")
    out = tmp_path / "cfgfit"
    # flag overrides config seed
    assert main(["fit", "--config", str(cfg), "--out", str(out),
                 "--seed", "11"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [11]


def test_cli_corrupt_chain_diagnostic(tmp_path, capsys):
    bad = tmp_path / "corrupt.bin"
    bad.write_bytes(b"XXXXXXXXgarbage")
    code = main(["summary", "--chain", str(bad)])
    assert code == 2
    assert "chain" in capsys.readouterr().err
