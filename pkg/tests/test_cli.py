import csv
import io
import json

import numpy as np
import pytest

from causalcap.capacity import SWEEP_COLUMNS, identity_code_protocol, protocol_to_json
from causalcap.channels import channel_to_json, erasure_channel
from causalcap.cli import format_number, main, parse_grid
from causalcap.operators import LabeledOperator, operator_to_json
from causalcap.process import (
    ProcessMatrix,
    decomposition_to_json,
    process_to_json,
    random_ordered_process,
)
from causalcap.reduction import alice_identity_routing, example_process

Z = np.diag([1.0, -1.0])


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_valid_process(tmp_path, capsys):
    W = random_ordered_process({"A_I": 2, "A_O": 2, "B_I": 2, "B_O": 2}, 2, 0, "ab")
    code, out, _ = run(capsys, "validate", "--input", write(tmp_path, "w.json", process_to_json(W)))
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert set(report["residuals"]) == {"positivity", "trace", "marginal_a", "marginal_b", "no_loops"}
    assert report["causal_order"]["ab"] <= 1e-9


def test_validate_names_violated_condition(tmp_path, capsys):
    base = np.eye(16) * 4 / 16
    names = ["A_I", "A_O", "B_I", "B_O"]
    zz = LabeledOperator([(n, 2) for n in names], np.kron(np.kron(np.eye(2), Z), np.kron(np.eye(2), Z)))
    W = ProcessMatrix(LabeledOperator([(n, 2) for n in names], base) + zz * 0.1)
    code, out, _ = run(capsys, "validate", "--input", write(tmp_path, "w.json", process_to_json(W)))
    report = json.loads(out)
    assert code == 1
    assert report["failures"] == ["no_loops"]


def test_validate_decomposition(tmp_path, capsys):
    data = decomposition_to_json(example_process(0.4, 2))
    code, out, _ = run(capsys, "validate", "--input", write(tmp_path, "d.json", data))
    report = json.loads(out)
    assert code == 0
    assert set(report["residuals"]) == {"mixture", "w_ab", "w_ba"}
    assert "causal_order_ab" in report["residuals"]["w_ab"]
    # swapping the components breaks their stated orders
    data["w_ab"], data["w_ba"] = data["w_ba"], data["w_ab"]
    code, out, _ = run(capsys, "validate", "--input", write(tmp_path, "d.json", data))
    failures = json.loads(out)["failures"]
    assert code == 1
    assert "w_ab.causal_order_ab" in failures and "w_ba.causal_order_ba" in failures


def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"op": {\n  "labels": [1, 2,,]}}')
    code, _, err = run(capsys, "validate", "--input", str(path))
    assert code == 2
    assert "line 2" in err and "column" in err


def test_missing_key_is_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "validate", "--input", write(tmp_path, "x.json", {"p": 0.5}))
    assert code == 2 and "error" in err


def test_contract(tmp_path, capsys):
    data = decomposition_to_json(example_process(0.7, 2))
    code, out, _ = run(capsys, "contract", "--input", write(tmp_path, "d.json", data))
    report = json.loads(out)
    assert code == 0
    assert report["p"] == 0.7
    assert max(report["bo_identity_residual"], report["reconstruction_residual"],
               report["erasure_residual"]) <= 1e-9
    data["alice"] = channel_to_json(alice_identity_routing(2, 3))
    code, out, _ = run(capsys, "contract", "--input", write(tmp_path, "d.json", data))
    assert code == 0 and json.loads(out)["passed"]


def test_theorem_sweep_csv(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "theorem-sweep", "--p-grid", "0:1:0.5", "--restarts", "2",
                     "--seed", "3", "--output", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_path.read_text())))
    assert tuple(rows[0].keys()) == SWEEP_COLUMNS
    assert [r["p"] for r in rows] == ["0", "0.5", "1"]
    assert float(rows[2]["q_cap_numeric_ab"]) == pytest.approx(1.0, abs=1e-6)
    assert float(rows[0]["q_cap_numeric_ba"]) == pytest.approx(1.0, abs=1e-6)
    assert all(r["seed"] == "3" and r["restarts"] == "2" for r in rows)


def test_theorem_sweep_single_direction(capsys):
    code, out, _ = run(capsys, "theorem-sweep", "--p-grid", "0.5:0.5:0.1", "--restarts", "1",
                       "--seed", "0", "--direction", "ab")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and row["q_cap_numeric_ba"] == ""


def test_theorem_sweep_requires_seed(capsys):
    code, _, err = run(capsys, "theorem-sweep", "--p-grid", "0:1:0.5")
    assert code == 2 and "--seed" in err


def test_protocol_sim(tmp_path, capsys):
    spec = protocol_to_json(identity_code_protocol(0.6, 2, 1))
    code, out, _ = run(capsys, "protocol-sim", "--input", write(tmp_path, "p.json", spec))
    report = json.loads(out)
    assert report["fidelity"] == pytest.approx(0.6, abs=1e-9)
    assert code == 1  # epsilon = 0 is not met
    spec["epsilon"] = 0.5
    code, out, _ = run(capsys, "protocol-sim", "--input", write(tmp_path, "p.json", spec))
    assert code == 0 and json.loads(out)["passed"]


def test_classical_cap_sweep(capsys):
    code, out, _ = run(capsys, "classical-cap", "--p-grid", "0:1:0.25", "--dim", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5
    for r in rows:
        assert float(r["classical_cap"]) == pytest.approx(float(r["closed_form"]), abs=1e-8)


def test_classical_cap_inputs(tmp_path, capsys):
    code, out, _ = run(capsys, "classical-cap", "--input",
                       write(tmp_path, "m.json", {"matrix": [[1, 0], [0, 1]]}))
    assert code == 0 and json.loads(out)["capacity"] == pytest.approx(1.0, abs=1e-9)
    C = erasure_channel(0.5, 2, "a", "b")
    data = {
        "channel": channel_to_json(C),
        "inputs": [{"in": [], "out": [{"name": "a", "dim": 2}],
                    "choi": operator_to_json(LabeledOperator([("a", 2)], np.diag(v)))}
                   for v in ([1.0, 0.0], [0.0, 1.0])],
        "povm": [np.diag(np.eye(3)[k]).tolist() for k in range(3)],
    }
    code, out, _ = run(capsys, "classical-cap", "--input", write(tmp_path, "c.json", data))
    assert code == 0 and json.loads(out)["capacity"] == pytest.approx(0.5, abs=1e-8)
    data["povm"] = data["povm"][:2]
    code, _, _ = run(capsys, "classical-cap", "--input", write(tmp_path, "c.json", data))
    assert code == 2


def test_bad_arguments(capsys):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "classical-cap", "--p-grid", "0:2:0.5")[0] == 2
    assert run(capsys, "classical-cap", "--p-grid", "oops")[0] == 2
    assert run(capsys, "theorem-sweep", "--seed", "1", "--tol", "-1")[0] == 2


def test_parse_grid_and_format():
    assert parse_grid("0:1:0.1") == tuple(round(0.1 * i, 12) for i in range(11))
    assert parse_grid("0.5:0.5:1") == (0.5,)
    assert format_number(0.1 + 0.2) == "0.3"
    assert format_number(-0.0) == "0"
    assert format_number(1e-20) == "0.00000000000000000001"
    assert format_number(None) == ""
    assert format_number(32) == "32"
