import io
import json
from importlib import resources

import jsonschema
import pytest

from linetime.cli import main

SIM = ["--epsilon", "0.1", "--dt", "0.001", "--t-max", "40", "--n-reps", "30", "--seed", "3"]


def run(argv):
    out = io.StringIO()
    code = main(argv, stdout=out)
    text = out.getvalue()
    return code, (json.loads(text) if text else None)


def schema(name):
    return json.loads(resources.files("linetime").joinpath("schemas", name).read_text())


def test_analyze_ray():
    code, out = run(["analyze", "--mu", "0", "--sigma", "1", "--a", "0", "--b", "1", "--x0", "0"])
    assert code == 0
    jsonschema.validate(out, schema("analyze.schema.json"))
    assert out["law"]["rate"] == pytest.approx(1.0, rel=1e-8)
    assert out["k_plus"] is None or out["k_minus"] is not None


def test_analyze_exit_codes():
    assert run(["analyze", "--mu", "0", "--sigma", "1", "--a", "0", "--b", "0", "--x0", "0"])[0] == 4
    assert run(["analyze", "--mu", "2x", "--sigma", "1", "--a", "0", "--b", "1", "--x0", "0"])[0] == 2
    assert run(["analyze", "--mu", "0", "--sigma", "x", "--a", "0", "--b", "1", "--x0", "0"])[0] == 3


def test_missing_seed_is_usage_error():
    assert run(["simulate", "truncated", "--c", "1", "--b", "1"])[0] == 2


def test_simulate_writes_csv_and_summary(tmp_path):
    csv, js = tmp_path / "out.csv", tmp_path / "out.json"
    code, out = run(["simulate", "joint", "--b", "1,-1", *SIM, "--csv", str(csv), "--json", str(js)])
    assert code == 0
    jsonschema.validate(out, schema("batch_summary.schema.json"))
    assert json.loads(js.read_text()) == out
    body = [ln for ln in csv.read_text().splitlines() if not ln.startswith("#")]
    assert body[0] == "V(b=1.0),V(b=-1.0)"
    assert len(body) == 31


def test_moments_outputs():
    code, out = run(["moments", "--b", "1", "--c", "2", "--p", "2", "--q", "2", "--rational"])
    assert code == 0 and out["exact"] == "17/10" and out["value"] == 1.7
    jsonschema.validate(out, schema("moments.schema.json"))
    code, out = run(["moments", "--b", "1", "--c", "2", "--mgf", "0.3", "0"])
    assert code == 0 and out["value"] == pytest.approx(1 / 0.7)
    assert run(["moments", "--b", "1", "--c", "2", "--mgf", "1.5", "0"])[0] == 3
    assert run(["moments", "--b", "-1", "--c", "2", "--p", "2", "--q", "1"])[0] != 0


def test_partialsum_command():
    code, out = run(["partialsum", "difference", "--k", "1", "--delta", "0.1", "--c", "0.1",
                     "--xi", "1", "--n-reps", "20", "--seed", "1"])
    assert code == 0
    jsonschema.validate(out, schema("batch_summary.schema.json"))


def test_verify_suites():
    code, out = run(["verify", "--suite", "repulsive-axis", "--seed", "1", "--n-reps", "300"])
    jsonschema.validate(out, schema("fit_report.schema.json"))
    assert code == 0
    assert run(["verify", "--suite", "nope", "--seed", "1"])[0] == 2


def test_manifest_replay(tmp_path):
    csv, man = tmp_path / "b.csv", tmp_path / "m.json"
    code, _ = run(["simulate", "truncated", "--c", "0.5", "--b", "1", *SIM,
                   "--csv", str(csv), "--manifest", str(man)])
    assert code == 0
    manifest = json.loads(man.read_text())
    jsonschema.validate(manifest, schema("manifest.schema.json"))
    for threads in ("1", "4"):
        code, out = run(["replay", str(man), "--threads", threads])
        assert code == 0 and out["identical"]
    manifest["outputs"]["csv"]["sha256"] = "0" * 64
    man.write_text(json.dumps(manifest))
    code, out = run(["replay", str(man)])
    assert code == 1 and not out["identical"]
