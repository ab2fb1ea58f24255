"""Command-line interface: exit codes, output shapes, file artifacts."""

import json
import subprocess
import sys

import pytest

from bftboot.cli import main
from bftboot.sim import SimConfig, Simulation


@pytest.fixture()
def sim_artifacts(tmp_path):
    """One tiny finished run: ledger export plus one aggregate bundle."""
    sim = Simulation(SimConfig(node_count=8, endorser_count=3, seed=5))
    sim.run()
    ledger_path = tmp_path / "ledger.txt"
    ledger_path.write_text(
        "\n".join(sim.ledger.export_lines(sim.scheme)) + "\n"
    )
    ident = sim.identities[0]
    agg_path = tmp_path / "aggregate.hex"
    keys_path = tmp_path / "keys.hex"
    agg_path.write_text(sim.scheme.aggregate_to_bytes(ident.aggregate).hex())
    keys_path.write_text(sim.scheme.key_set_to_bytes(ident.key_set).hex())
    return ledger_path, agg_path, keys_path


def test_probability_table_stdout(capsys):
    assert main(["probability-table"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("# manifest: {")
    assert lines[1] == "n,p=1/2,p=1/3"
    assert len(lines) == 2 + 21  # n from 10 to 30
    table = {}
    for line in lines[2:]:
        n, half, third = line.split(",")
        table[int(n)] = (float(half), float(third))
    assert table[10][0] == pytest.approx(5.8594e-03, rel=1e-4)
    assert table[10][1] == pytest.approx(1.6936e-03, rel=1e-4)
    assert table[20][0] == pytest.approx(1.2398e-05, rel=1e-4)
    assert table[30][1] == pytest.approx(5.0929e-09, rel=1e-4)


def test_probability_table_to_file(tmp_path, capsys):
    out_path = tmp_path / "table.csv"
    assert main(["probability-table", "--n-min", "10", "--n-max", "12",
                 "--ratios", "1/2", "--out", str(out_path)]) == 0
    assert capsys.readouterr().out == ""
    lines = out_path.read_text().strip().split("\n")
    assert lines[1] == "n,p=1/2"
    assert len(lines) == 5
    manifest = json.loads(lines[0].removeprefix("# manifest: "))
    assert manifest["command"] == "probability-table"
    assert manifest["outputs"] == ["table.csv"]


def test_probability_table_equivalent_ratio_forms(capsys):
    assert main(["probability-table", "--n-min", "10", "--n-max", "10",
                 "--ratios", "1/4"]) == 0
    fraction = capsys.readouterr().out.strip().split("\n")[-1]
    assert main(["probability-table", "--n-min", "10", "--n-max", "10",
                 "--ratios", "0.25"]) == 0
    decimal = capsys.readouterr().out.strip().split("\n")[-1]
    assert fraction.split(",")[1] == decimal.split(",")[1]


def test_probability_table_bad_range(capsys):
    assert main(["probability-table", "--n-min", "5", "--n-max", "3"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "BadRange"
    assert "n_min" in err["detail"]


def test_probability_table_bad_ratio(capsys):
    assert main(["probability-table", "--ratios", "0.9"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "BadRatio"


def test_keygen_deterministic(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = tmp_path / "a" / "key.json"
    b = tmp_path / "b" / "key.json"
    assert main(["keygen", "--seed", "9", "--backend", "model",
                 "--out", str(a)]) == 0
    assert main(["keygen", "--seed", "9", "--backend", "model",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    payload = json.loads(a.read_text())
    assert payload["manifest"]["command"] == "keygen"
    assert payload["secret"].startswith("0x")
    bytes.fromhex(payload["public"])


def test_keygen_stdout_backends_differ(capsys):
    assert main(["keygen", "--seed", "4", "--backend", "model"]) == 0
    model_out = json.loads(capsys.readouterr().out)
    assert main(["keygen", "--seed", "4", "--backend", "pairing"]) == 0
    pairing_out = json.loads(capsys.readouterr().out)
    assert len(bytes.fromhex(pairing_out["public"])) == 96
    assert model_out["public"] != pairing_out["public"]


def test_verify_bundle_accepts_honest(sim_artifacts, capsys):
    _, agg_path, keys_path = sim_artifacts
    code = main(["verify", "--backend", "model",
                 "--aggregate", str(agg_path), "--keys", str(keys_path)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "ACCEPT"


def test_verify_bundle_rejects_flipped_byte(sim_artifacts, tmp_path, capsys):
    _, agg_path, keys_path = sim_artifacts
    raw = bytearray(bytes.fromhex(agg_path.read_text()))
    raw[5] ^= 0x01
    bad = tmp_path / "tampered.hex"
    bad.write_text(raw.hex())
    code = main(["verify", "--backend", "model",
                 "--aggregate", str(bad), "--keys", str(keys_path)])
    assert code == 1
    assert capsys.readouterr().out.strip() == "REJECT"


def test_verify_bundle_rejects_mismatched_keys(sim_artifacts, tmp_path, capsys):
    # A valid key set that is not the one the vector was built against.
    _, agg_path, _ = sim_artifacts
    sim = Simulation(SimConfig(node_count=8, endorser_count=3, seed=77))
    other = sim.identities[0].key_set
    keys_path = tmp_path / "other.hex"
    keys_path.write_text(sim.scheme.key_set_to_bytes(other).hex())
    code = main(["verify", "--backend", "model",
                 "--aggregate", str(agg_path), "--keys", str(keys_path)])
    assert code == 1


def test_verify_bad_hex_is_usage_error(tmp_path, capsys):
    agg = tmp_path / "agg.hex"
    keys = tmp_path / "keys.hex"
    agg.write_text("zz-not-hex")
    keys.write_text("00")
    assert main(["verify", "--backend", "model", "--aggregate", str(agg),
                 "--keys", str(keys)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "MalformedInput"


def test_verify_missing_file_is_io_error(tmp_path, capsys):
    assert main(["verify", "--backend", "model",
                 "--aggregate", str(tmp_path / "nope.hex"),
                 "--keys", str(tmp_path / "nope2.hex")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "IoFailure"


def test_verify_requires_inputs(capsys):
    assert main(["verify", "--backend", "model"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "MalformedInput"


def test_verify_ledger_accepts_export(sim_artifacts, capsys):
    ledger_path, _, _ = sim_artifacts
    assert main(["verify", "--backend", "model",
                 "--ledger", str(ledger_path)]) == 0
    out = capsys.readouterr().out.strip().split("\n")
    assert out[-1] == "8/8 records accepted"
    assert all(line.endswith("ACCEPT") for line in out[:-1])


def test_verify_ledger_flags_tampered_record(sim_artifacts, tmp_path, capsys):
    ledger_path, _, _ = sim_artifacts
    lines = ledger_path.read_text().strip().split("\n")
    record = json.loads(lines[3])
    blob = bytearray(bytes.fromhex(record["aggregate"]))
    blob[6] ^= 0xFF
    record["aggregate"] = blob.hex()
    lines[3] = json.dumps(record, sort_keys=True, separators=(",", ":"))
    tampered = tmp_path / "tampered-ledger.txt"
    tampered.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--backend", "model",
                 "--ledger", str(tampered)]) == 1
    out = capsys.readouterr().out.strip().split("\n")
    assert out[3].startswith("record 3: REJECT")
    assert out[-1] == "7/8 records accepted"


def test_simulate_writes_deterministic_artifacts(tmp_path, capsys):
    config = {"node_count": 16, "endorser_count": 4, "seed": 3}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    assert main(["simulate", "--config", str(config_path),
                 "--out", str(dir_a)]) == 0
    stdout_a = capsys.readouterr().out
    assert main(["simulate", "--config", str(config_path),
                 "--out", str(dir_b)]) == 0
    capsys.readouterr()
    report_a = (dir_a / "report.json").read_bytes()
    assert report_a == (dir_b / "report.json").read_bytes()
    series_a = (dir_a / "timeseries.csv").read_bytes()
    assert series_a == (dir_b / "timeseries.csv").read_bytes()

    rendered = json.loads(stdout_a)
    on_disk = json.loads(report_a)
    assert rendered == on_disk
    assert on_disk["ledger"]["active_records"] == 16
    assert on_disk["manifest"]["seed"] == 3


def test_simulate_seed_override_changes_output(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"node_count": 16, "endorser_count": 4}))
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    assert main(["simulate", "--config", str(config_path), "--seed", "1",
                 "--out", str(dir_a)]) == 0
    capsys.readouterr()
    assert main(["simulate", "--config", str(config_path), "--seed", "2",
                 "--out", str(dir_b)]) == 0
    capsys.readouterr()
    a = json.loads((dir_a / "report.json").read_text())
    b = json.loads((dir_b / "report.json").read_text())
    assert a["manifest"]["seed"] == 1
    assert a["manifest"]["config_digest"] != b["manifest"]["config_digest"]
    assert a["timing_ms"] != b["timing_ms"]


def test_simulate_csv_stdout(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"node_count": 12, "endorser_count": 3,
                                       "seed": 2}))
    assert main(["simulate", "--config", str(config_path),
                 "--out", str(tmp_path / "o"), "--format", "csv"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("# manifest: {")
    assert lines[1] == "event_time_ms,event_type,node_id,identity"
    assert out == (tmp_path / "o" / "timeseries.csv").read_text()


def test_simulate_rejects_unknown_config_field(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"node_countt": 10}))
    assert main(["simulate", "--config", str(config_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigInvalid"
    assert "node_countt" in err["detail"]


def test_simulate_rejects_bad_values(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"node_count": 3,
                                       "endorser_count": 20}))
    assert main(["simulate", "--config", str(config_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigInvalid"


def test_simulate_missing_config_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "IoFailure"


def test_pow_baseline_stdout_and_file(tmp_path, capsys):
    out_path = tmp_path / "pow.json"
    assert main(["pow-baseline", "--difficulty", "0", "--trials", "4",
                 "--out", str(out_path)]) == 0
    stdout = json.loads(capsys.readouterr().out)
    on_disk = json.loads(out_path.read_text())
    assert stdout == on_disk
    assert stdout["difficulty"] == 0
    assert stdout["expected_hashes_per_solve"] == 1.0
    assert stdout["mean_hashes_per_solve"] == 1.0
    assert stdout["manifest"]["command"] == "pow-baseline"


def test_pow_baseline_rejects_bad_difficulty(capsys):
    assert main(["pow-baseline", "--difficulty", "40"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ValueError"


def test_console_script_version():
    proc = subprocess.run([sys.executable, "-m", "bftboot.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "bftboot 0.1.0"
