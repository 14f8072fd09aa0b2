"""End-to-end command-line behavior, driven in-process through main()."""

from __future__ import annotations

import json

import numpy as np
import pytest

from sbcn import __version__
from sbcn.cli import main
from sbcn.data import load_dataset, save_dataset
from sbcn.document import parse_document

TOY_CSV = "sample,v0,v1\ns1,1,0\ns2,1,1\ns3,0,0\ns4,1,1\n"


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(TOY_CSV)
    return path


def _chain_csv(tmp_path, m=400, seed=0):
    rng = np.random.default_rng(seed)
    a = (rng.random(m) < 0.9).astype(np.uint8)
    b = (a & (rng.random(m) < 0.85)).astype(np.uint8)
    c = (b & (rng.random(m) < 0.85)).astype(np.uint8)
    lines = ["sample,a,b,c"]
    for i in range(m):
        lines.append(f"s{i + 1},{a[i]},{b[i]},{c[i]}")
    path = tmp_path / "chain.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# infer


def test_infer_to_stdout(toy_csv, capsys):
    assert main(["infer", str(toy_csv)]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert doc.events == ("v0", "v1")
    assert [(e.parent, e.child) for e in doc.edges] == [("v0", "v1")]
    assert doc.metadata["regularizer"] == "bic"
    assert doc.metadata["mode"] == "hill_climb"


def test_infer_writes_document_and_dot(toy_csv, tmp_path, capsys):
    out = tmp_path / "net.json"
    dot = tmp_path / "net.dot"
    assert main(["infer", str(toy_csv), "-o", str(out), "--dot", str(dot)]) == 0
    assert capsys.readouterr().out == ""
    doc = parse_document(out.read_text())
    # edge-model log-likelihood minus the 3-parameter penalty at m = 4
    assert doc.metadata["score"] == pytest.approx(-6.2383246250395075)
    assert doc.metadata["log_likelihood"] == pytest.approx(-4.158883083359672)
    assert '"v0" -> "v1";' in dot.read_text()


def test_infer_reg_none_and_pf_only(toy_csv, capsys):
    assert main(["infer", str(toy_csv), "--reg", "none"]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert doc.metadata["penalty"] == 0.0
    assert main(["infer", str(toy_csv), "--pf-only"]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert doc.metadata["mode"] == "prima_facie_only"
    assert [(e.parent, e.child) for e in doc.edges] == [("v0", "v1")]


def test_infer_exhaustive_search(toy_csv, capsys):
    assert main(["infer", str(toy_csv), "--search", "exhaustive"]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert [(e.parent, e.child) for e in doc.edges] == [("v0", "v1")]


def test_infer_missing_file_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["infer", str(missing)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("sbcn: error:")
    assert not missing.exists()


def test_infer_malformed_dataset_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("sample,a\ns1,7\n")
    assert main(["infer", str(bad)]) == 2
    assert "expected 0 or 1" in capsys.readouterr().err


def test_infer_is_deterministic(toy_csv, capsys):
    main(["infer", str(toy_csv)])
    first = capsys.readouterr().out
    main(["infer", str(toy_csv)])
    assert capsys.readouterr().out == first


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "sim"
    code = main([
        "simulate", "--class", "tree", "-n", "6", "-m", "40",
        "--seed", "3", "-o", str(out),
    ])
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert [p.split("/")[-1] for p in printed] == [
        "dataset.csv", "structure.txt", "model.json",
    ]
    ds = load_dataset(out / "dataset.csv")
    assert ds.n_samples == 40 and ds.n_events == 6
    sidecar = json.loads((out / "model.json").read_text())
    assert sidecar["kind"] == "tree" and sidecar["seed"] == 3
    edges = [tuple(e) for e in sidecar["edges"]]
    structure = [
        tuple(line.split("\t")) for line in (out / "structure.txt").read_text().splitlines()
    ]
    assert structure == sorted(edges)
    # a tree has n - 1 edges
    assert len(edges) == 5


def test_simulate_is_seed_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        main([
            "simulate", "--class", "dag_multi_source_disj", "-n", "8", "-m", "60",
            "--seed", "11", "-o", str(tmp_path / name),
        ])
    capsys.readouterr()
    assert (tmp_path / "a/dataset.csv").read_text() == (
        tmp_path / "b/dataset.csv"
    ).read_text()
    assert (tmp_path / "a/model.json").read_text() == (
        tmp_path / "b/model.json"
    ).read_text()


def test_simulate_disjunctive_sidecar_gates(tmp_path, capsys):
    out = tmp_path / "disj"
    main([
        "simulate", "--class", "dag_single_source_disj", "-n", "7", "-m", "30",
        "-o", str(out),
    ])
    capsys.readouterr()
    sidecar = json.loads((out / "model.json").read_text())
    gates = set(sidecar["logic"].values())
    assert gates == {None, "or"}


def test_simulate_xor_also_writes_formulas(tmp_path, capsys):
    out = tmp_path / "xor"
    main([
        "simulate", "--class", "dag_multi_source_xor", "-n", "8", "-m", "30",
        "--seed", "2", "-o", str(out),
    ])
    printed = capsys.readouterr().out.splitlines()
    assert any(p.endswith("formulas.txt") for p in printed)
    formulas = (out / "formulas.txt").read_text().splitlines()
    sidecar = json.loads((out / "model.json").read_text())
    assert sidecar["formulas"] == formulas
    assert all(line.startswith("xor_") for line in formulas)


def test_simulate_noise_changes_cells(tmp_path, capsys):
    clean_dir = tmp_path / "clean"
    noisy_dir = tmp_path / "noisy"
    base = ["simulate", "--class", "tree", "-n", "10", "-m", "500", "--seed", "4"]
    main(base + ["-o", str(clean_dir)])
    main(base + ["--noise", "0.2", "-o", str(noisy_dir)])
    capsys.readouterr()
    clean = load_dataset(clean_dir / "dataset.csv")
    noisy = load_dataset(noisy_dir / "dataset.csv")
    changed = (clean.cells != noisy.cells).mean()
    # coin mode at level 0.2 flips ~10% of cells; allow ~four sigma
    assert changed == pytest.approx(0.1, abs=0.02)


def test_simulate_bad_rates_exit_2(tmp_path, capsys):
    code = main([
        "simulate", "--class", "tree", "-n", "5", "-m", "10",
        "--activation", "0.3", "--spontaneous", "0.2", "-o", str(tmp_path / "x"),
    ])
    assert code == 2
    assert "sbcn: error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# lift


def test_lift_appends_columns(toy_csv, tmp_path, capsys):
    formulas = tmp_path / "formulas.txt"
    formulas.write_text("both = v0 & v1\n")
    out = tmp_path / "lifted.csv"
    assert main(["lift", str(toy_csv), str(formulas), "-o", str(out)]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    lifted = load_dataset(out)
    assert lifted.event_names == ("v0", "v1", "both")
    assert list(lifted.cells[:, 2]) == [0, 1, 0, 1]


def test_lift_tab_delimiter(toy_csv, tmp_path, capsys):
    formulas = tmp_path / "formulas.txt"
    formulas.write_text("either = (v0 | v1)\n")
    out = tmp_path / "lifted.tsv"
    main(["lift", str(toy_csv), str(formulas), "-o", str(out), "--delimiter", "tab"])
    capsys.readouterr()
    assert "\t" in out.read_text().splitlines()[0]


def test_lift_empty_formula_file_exits_2(toy_csv, tmp_path, capsys):
    formulas = tmp_path / "empty.txt"
    formulas.write_text("# nothing here\n")
    code = main(["lift", str(toy_csv), str(formulas), "-o", str(tmp_path / "o.csv")])
    assert code == 2
    assert "no formulas" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# validate


def test_validate_accepts_own_inference(toy_csv, tmp_path, capsys):
    doc_path = tmp_path / "net.json"
    main(["infer", str(toy_csv), "-o", str(doc_path)])
    capsys.readouterr()
    assert main(["validate", str(doc_path), str(toy_csv)]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_rejects_foreign_dataset(toy_csv, tmp_path, capsys):
    doc_path = tmp_path / "net.json"
    main(["infer", str(toy_csv), "-o", str(doc_path)])
    capsys.readouterr()
    # a dataset with the same schema but flipped roles: v1 now dominates
    other = tmp_path / "other.csv"
    other.write_text("sample,v0,v1\ns1,0,1\ns2,1,1\ns3,0,0\ns4,0,1\n")
    assert main(["validate", str(doc_path), str(other)]) == 1
    err = capsys.readouterr().err
    assert "violation:" in err
    assert "prima facie" in err


def test_validate_rejects_schema_mismatch(toy_csv, tmp_path, capsys):
    doc_path = tmp_path / "net.json"
    main(["infer", str(toy_csv), "-o", str(doc_path)])
    capsys.readouterr()
    renamed = tmp_path / "renamed.csv"
    renamed.write_text(TOY_CSV.replace("v0", "x0"))
    assert main(["validate", str(doc_path), str(renamed)]) == 1
    assert "event names disagree" in capsys.readouterr().err


def test_validate_rejects_tampered_tables(toy_csv, tmp_path, capsys):
    doc_path = tmp_path / "net.json"
    main(["infer", str(toy_csv), "-o", str(doc_path)])
    capsys.readouterr()
    body = json.loads(doc_path.read_text())
    body["cpts"][0]["p_one"] = [0.123]
    doc_path.write_text(json.dumps(body))
    assert main(["validate", str(doc_path), str(toy_csv)]) == 1
    assert "does not match a refit" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bootstrap


def test_bootstrap_annotates_confidence(tmp_path, capsys):
    data = _chain_csv(tmp_path)
    assert main([
        "bootstrap", str(data), "--replicates", "10", "--seed", "1",
    ]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert doc.metadata["replicates"] == 10
    assert doc.edges  # the chain signal is strong enough to keep edges
    assert all(e.confidence is not None for e in doc.edges)
    strong = {(e.parent, e.child): e.confidence for e in doc.edges}
    assert strong.get(("a", "b"), 0.0) >= 0.8


def test_bootstrap_single_replicate(toy_csv, capsys):
    assert main(["bootstrap", str(toy_csv), "--replicates", "1"]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert all(e.confidence in (0.0, 1.0) for e in doc.edges)


# ---------------------------------------------------------------------------
# experiment


def _write_grid_config(tmp_path):
    config = {
        "classes": ["tree"],
        "node_counts": [5],
        "sample_counts": [30],
        "noise_levels": [0.0, 0.1],
        "structures_per_class": 2,
        "repetitions": 2,
        "variants": ["prima_facie_only", "bic"],
        "master_seed": 7,
    }
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(config))
    return path


def test_experiment_runs_config(tmp_path, capsys):
    config = _write_grid_config(tmp_path)
    out = tmp_path / "run"
    code = main(["experiment", "-c", str(config), "-o", str(out), "--quiet"])
    assert code == 0
    captured = capsys.readouterr()
    assert "rows: 16 over 2 cells (2 computed, 0 reused)" in captured.out
    assert captured.err == ""  # --quiet suppresses progress
    assert (out / "results.tsv").exists()
    assert (out / "aggregates.tsv").exists()
    assert (out / "errors.tsv").read_text().count("\n") == 1  # header only


def test_experiment_progress_and_resume(tmp_path, capsys):
    config = _write_grid_config(tmp_path)
    out = tmp_path / "run"
    main(["experiment", "-c", str(config), "-o", str(out)])
    first = capsys.readouterr()
    assert "[1/2]" in first.err and "[2/2]" in first.err
    main(["experiment", "-c", str(config), "-o", str(out)])
    second = capsys.readouterr()
    assert "(0 computed, 2 reused)" in second.out


def test_experiment_seed_override_changes_cells(tmp_path, capsys):
    config = _write_grid_config(tmp_path)
    out = tmp_path / "run"
    main(["experiment", "-c", str(config), "-o", str(out), "--quiet"])
    main(["experiment", "-c", str(config), "-o", str(out), "--seed", "8", "--quiet"])
    second = capsys.readouterr().out
    # different master seed means different cell keys: nothing is reused
    assert "(2 computed, 0 reused)" in second


def test_experiment_env_jobs(tmp_path, capsys, monkeypatch):
    config = _write_grid_config(tmp_path)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    main(["experiment", "-c", str(config), "-o", str(serial), "--quiet"])
    monkeypatch.setenv("SBCN_JOBS", "2")
    main(["experiment", "-c", str(config), "-o", str(parallel), "--quiet"])
    capsys.readouterr()
    strip = lambda text: ["\t".join(l.split("\t")[:-1]) for l in text.splitlines()]
    assert strip((parallel / "results.tsv").read_text()) == strip(
        (serial / "results.tsv").read_text()
    )


def test_experiment_rejects_garbage_jobs_env(tmp_path, capsys, monkeypatch):
    config = _write_grid_config(tmp_path)
    monkeypatch.setenv("SBCN_JOBS", "many")
    code = main(["experiment", "-c", str(config), "-o", str(tmp_path / "x")])
    assert code == 2
    assert "SBCN_JOBS" in capsys.readouterr().err


def test_experiment_rejects_unknown_config_keys(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"classes": ["tree"], "topologies": ["x"]}))
    code = main(["experiment", "-c", str(bad), "-o", str(tmp_path / "x")])
    assert code == 2
    assert "unknown grid config keys" in capsys.readouterr().err


def test_experiment_rejects_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all")
    code = main(["experiment", "-c", str(bad), "-o", str(tmp_path / "x")])
    assert code == 2


# ---------------------------------------------------------------------------
# harness


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == f"sbcn {__version__}"


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
