"""End-to-end tests of the command-line interface."""

import json
from pathlib import Path

import pytest

from app import main
from config import config
from modules.file_handler import ChainFile, chain_from_document
from utils.validators import validate_chain

FAST = ["--restarts", "2", "--max-iter", "100"]

PENTAGON = {
    "vertices": ["a", "b", "c", "d", "e"],
    "edges": [["a", "b"], ["b", "c"], ["c", "d"], ["d", "e"], ["e", "b"], ["e", "a"]],
    "H": ["a", "c"],
}


def write(path: Path, document) -> str:
    path.write_text(json.dumps(document))
    return str(path)


@pytest.fixture
def pentagon_dir(tmp_path):
    out = tmp_path / "glued"
    assert main(["glued", "--graph", write(tmp_path / "graph.json", PENTAGON), "--out", str(out)]) == 0
    return out


@pytest.fixture
def two_state_chain(tmp_path):
    return write(tmp_path / "two.json",
                 {"states": ["0", "1"], "pi": [0.5, 0.5], "Q": [[-1, 1], [1, -1]]})


def test_glued_writes_four_artifacts(pentagon_dir):
    assert sorted(p.name for p in pentagon_dir.iterdir()) == \
        ["chain.json", "couplings.json", "partition.json", "quantities.json"]
    quantities = json.loads((pentagon_dir / "quantities.json").read_text())
    assert quantities["closed_form"]["Q_hat_12"] == pytest.approx(7 / 15, abs=1e-12)
    assert quantities["definition"]["chi"] == pytest.approx(15 / 28, abs=1e-12)
    assert all(value <= 1e-12 for value in quantities["difference"].values())
    assert quantities["vertices"] == 8


def test_glued_to_stdout(tmp_path, capsys):
    assert main(["glued", "--graph", write(tmp_path / "graph.json", PENTAGON)]) == 0
    document = json.loads(capsys.readouterr().out)
    assert set(document) == {"chain", "partition", "couplings", "quantities"}


def test_glued_rejects_adjacent_h(tmp_path, capsys):
    graph = dict(PENTAGON, H=["a", "b"])
    assert main(["glued", "--graph", write(tmp_path / "graph.json", graph)]) == 1
    assert "neighbour condition" in capsys.readouterr().err


def test_validate_pentagon(pentagon_dir, capsys):
    code = main(["validate", "--chain", str(pentagon_dir / "chain.json"),
                 "--partition", str(pentagon_dir / "partition.json"),
                 "--couplings", str(pentagon_dir / "couplings.json")])
    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["ok"] is True
    assert len(document["reports"]) == 4


def test_validate_broken_row_sum(tmp_path, capsys):
    chain = write(tmp_path / "bad.json",
                  {"states": ["0", "1"], "pi": [0.5, 0.5], "Q": [[-1, 1.5], [1, -1]]})
    assert main(["validate", "--chain", chain]) == 1
    document = json.loads(capsys.readouterr().out)
    invariants = [v["invariant"] for v in document["reports"][0]["violations"]]
    assert "row_sum" in invariants


def test_missing_file_is_io_failure(tmp_path):
    assert main(["validate", "--chain", str(tmp_path / "nope.json")]) == 2


def test_malformed_file_is_io_failure(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text("{not json")
    assert main(["validate", "--chain", str(path)]) == 2
    assert main(["validate", "--chain", write(tmp_path / "c.json", {"states": ["0"]})]) == 2


def test_non_utf8_file_is_io_failure(tmp_path, capsys):
    path = tmp_path / "chain.json"
    path.write_bytes(b"\xff\xfe{")
    assert main(["validate", "--chain", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_tolerance_override(two_state_chain):
    assert main(["validate", "--chain", two_state_chain, "--tol", "speed=1"]) == 2


def test_decompose_pentagon_is_deterministic(pentagon_dir, tmp_path):
    outputs = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        assert main(["decompose", "--chain", str(pentagon_dir / "chain.json"),
                     "--partition", str(pentagon_dir / "partition.json"), "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    document = json.loads(outputs[0])
    assert document["projection"]["Q"][0][1] == pytest.approx(7 / 15, abs=1e-12)
    assert document["projection"]["pi"] == pytest.approx([0.5, 0.5])
    assert set(document["restrictions"]) == {"1", "2"}


def test_decompose_output_reads_back_as_valid_chains(pentagon_dir, tmp_path):
    out = tmp_path / "decomposition.json"
    assert main(["decompose", "--chain", str(pentagon_dir / "chain.json"),
                 "--partition", str(pentagon_dir / "partition.json"), "--out", str(out)]) == 0
    document = json.loads(out.read_text())
    chains = [document["projection"]] + list(document["restrictions"].values())
    for entry in chains:
        chain = chain_from_document(ChainFile.model_validate(entry))
        assert validate_chain(chain).ok, entry


def test_decompose_single_class(two_state_chain, tmp_path, capsys):
    partition = write(tmp_path / "partition.json", {"classes": ["all"], "membership": [[1], [1]]})
    assert main(["decompose", "--chain", two_state_chain, "--partition", partition]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["projection"]["Q"] == [[0]]
    assert document["projection"]["pi"] == [1]


def test_constants_two_state(two_state_chain, capsys):
    assert main(["constants", "--chain", two_state_chain] + FAST) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["lambda"] == pytest.approx(2.0, rel=1e-12)
    assert document["alpha_est"]["bound"] == "upper"
    assert document["provenance"]["restarts"] == 2


def test_constants_reducible_chain_exits_zero(tmp_path, capsys):
    Q = [[-1, 1, 0, 0], [1, -1, 0, 0], [0, 0, -1, 1], [0, 0, 1, -1]]
    chain = write(tmp_path / "reducible.json",
                  {"states": ["a", "b", "c", "d"], "pi": [0.25] * 4, "Q": Q})
    assert main(["constants", "--chain", chain] + FAST) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["lambda"] == 0
    assert document["irreducible"] is False
    assert any("reducible" in w for w in document["warnings"])


def test_bound_pentagon(pentagon_dir, capsys):
    code = main(["bound", "--chain", str(pentagon_dir / "chain.json"),
                 "--partition", str(pentagon_dir / "partition.json"),
                 "--couplings", str(pentagon_dir / "couplings.json")] + FAST)
    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["chi"] == pytest.approx(15 / 28, abs=1e-12)
    poincare = document["verdicts"][0]
    assert poincare["kind"] == "POINCARE" and poincare["pass"] is True


def test_bound_without_couplings_fails(pentagon_dir, capsys):
    code = main(["bound", "--chain", str(pentagon_dir / "chain.json"),
                 "--partition", str(pentagon_dir / "partition.json")] + FAST)
    assert code == 1
    assert "no coupling" in capsys.readouterr().err


def test_bound_with_product_couplings(tmp_path, capsys):
    chain = write(tmp_path / "triangle.json", {
        "states": ["x", "y", "z"], "pi": [1 / 3] * 3,
        "Q": [[-1, 0.5, 0.5], [0.5, -1, 0.5], [0.5, 0.5, -1]],
    })
    partition = write(tmp_path / "partition.json", {
        "classes": ["1", "2"], "membership": [[1, 0], [0.5, 0.5], [0, 1]],
    })
    code = main(["bound", "--chain", chain, "--partition", partition, "--product-couplings"] + FAST)
    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["chi"] > 0


def test_mixing_csv(two_state_chain, capsys):
    code = main(["mixing", "--chain", two_state_chain, "--eps", "0.25", "--t-max", "1",
                 "--step", "0.05"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,max_tv"
    assert lines[1] == "0,0.5"
    assert lines[-1].startswith("# t_bracket,")
    assert float(lines[-1].split(",")[1]) == pytest.approx(0.35)
    lam = next(line for line in lines if line.startswith("# lambda,"))
    assert float(lam.split(",")[1]) == pytest.approx(2.0, rel=1e-12)


def test_mixing_not_reached(two_state_chain, capsys):
    assert main(["mixing", "--chain", two_state_chain, "--eps", "0.01", "--t-max", "0.5"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "# t_bracket,not reached"


def test_mixing_with_estimates(tmp_path, capsys):
    chain = write(tmp_path / "path.json", {
        "states": ["a", "b", "c"], "pi": [0.25, 0.5, 0.25],
        "Q": [[-1, 1, 0], [0.5, -1, 0.5], [0, 1, -1]],
    })
    assert main(["mixing", "--chain", chain, "--with-estimates"] + FAST) == 0
    lines = capsys.readouterr().out.splitlines()
    keys = [line[2:].split(",")[0] for line in lines if line.startswith("# ")]
    assert keys == ["lambda", "poincare_ratio", "mlsi_ratio", "lsi_ratio", "t_bracket"]
    assert float(lines[-1].split(",")[1]) > 0


def test_mixing_without_estimates_has_no_entropy_ratios(two_state_chain, capsys):
    assert main(["mixing", "--chain", two_state_chain, "--t-max", "1", "--step", "0.05"]) == 0
    out = capsys.readouterr().out
    assert "mlsi_ratio" not in out and "lsi_ratio" not in out


def test_version(capsys):
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert "fuzzy-decomp" in out
    assert config.app.version in out
