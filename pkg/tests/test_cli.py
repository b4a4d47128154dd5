import json

import pytest
import yaml

from lrperc import cli
from lrperc.errors import InternalConsistencyError
from lrperc.montecarlo import set_workers, simulate
from lrperc.lattice import nearest_neighbour


def nn(p, d=2, **extra):
    return {"family": "table", "d": d, "params": {"nearest_neighbour": p}, **extra}


def write(tmp_path, config, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(config))
    return str(path)


def run_main(tmp_path, *argv):
    out = tmp_path / "out.json"
    rc = cli.main([*argv, "--out", str(out)])
    return rc, json.loads(out.read_text()), out.read_bytes()


def test_explore_vertex_list_matches_bfs(tmp_path):
    cfg = write(tmp_path, {"command": "explore", "kernel": nn(0.45), "n": 6, "seed": "0x2a"})
    rc1, explore, _ = run_main(tmp_path, "--config", cfg, "--no-timing")
    rc2, bfs, _ = run_main(tmp_path, "bfs", "--config", cfg, "--no-timing")
    assert rc1 == rc2 == 0
    a = json.dumps(explore["results"]["vertices"]).encode()
    b = json.dumps(bfs["results"]["vertices"]).encode()
    assert a == b
    assert len(bfs["results"]["vertices"]) > 1


def test_negative_replicas_is_validation_error(tmp_path, monkeypatch):
    called = []
    monkeypatch.setitem(cli.HANDLERS, "theta", lambda *a: called.append(a))
    cfg = write(tmp_path, {"command": "theta", "kernel": nn(0.5), "n": 4, "replicas": -3})
    rc, doc, _ = run_main(tmp_path, "--config", cfg)
    assert rc == 2
    assert doc["error"]["module"] == "cli"
    assert not called


@pytest.mark.parametrize("config", [
    {"command": "theta", "kernel": nn(0.5), "n": 4, "replicas": 10, "unknown": 1},
    {"command": "theta", "kernel": nn(0.5), "n": 4},
    {"command": "explore", "kernel": {"family": "table", "params": {}}, "n": 2},
    {"command": "explore", "kernel": nn(1.5), "n": 2},
    {"command": "explore", "kernel": {**nn(0.5), "orientation": "oriented"}, "n": 2},
    {"command": "couple", "kernel": nn(0.5), "kernel_prime": nn(0.5), "n": 2},
    {"command": "nonsense"},
])
def test_invalid_configs(config):
    doc, rc = cli.run_config(config)
    assert rc == 2
    assert {"module", "operation", "message"} <= set(doc["error"])


def test_size_error_exit_code():
    J = nn(0.3)
    doc, rc = cli.run_config({"command": "enumerate", "kernel": J, "n": 2,
                              "kernel_prime": {**J, "overrides": [{"displacement": [1, 0],
                                                                   "value": 0.1}]},
                              "functional": "cluster_h"})
    assert rc == 3 and doc["error"]["type"] == "SizeError"


def test_bracketing_exit_code():
    doc, rc = cli.run_config({"command": "bisect", "phi": {"d": 2, "nearest_neighbour": 0.0},
                              "n": 4, "replicas": 10})
    assert rc == 4 and doc["error"]["operation"] == "bisect_beta_c"


def test_fit_exit_code():
    doc, rc = cli.run_config({"command": "decay", "kernel": nn(0.0), "n_list": [2, 3, 4],
                              "replicas": 10})
    assert rc == 4 and doc["error"]["type"] == "FitError"


def test_consistency_exit_code(monkeypatch):
    def broken(config, ctx):
        raise InternalConsistencyError("synthetic", module="exploration", operation="step")

    monkeypatch.setitem(cli.HANDLERS, "explore", broken)
    doc, rc = cli.run_config({"command": "explore", "kernel": nn(0.5), "n": 2})
    assert rc == 5 and doc["error"]["module"] == "exploration"


def test_document_fields():
    doc, rc = cli.run_config({"command": "theta", "kernel": nn(0.5), "n": 4, "replicas": 100})
    assert rc == 0
    for key in ("schema_version", "command", "config", "config_digest", "generator", "results",
                "wall_time_s"):
        assert key in doc
    assert doc["generator"] == "philox4x64-10/enc1"


def test_byte_identical_reruns(tmp_path):
    cfg = write(tmp_path, {"command": "couple", "kernel": nn(0.45), "n": 4, "replicas": 30,
                           "kernel_prime": nn(0.45, overrides=[{"displacement": [1, 0],
                                                                "value": 0.3}])})
    _, _, a = run_main(tmp_path, "--config", cfg, "--no-timing")
    _, _, b = run_main(tmp_path, "--config", cfg, "--no-timing", "--workers", "2")
    assert a == b


def test_seed_override_and_hex(tmp_path):
    cfg = write(tmp_path, {"command": "theta", "kernel": nn(0.5), "n": 4, "replicas": 10})
    _, doc, _ = run_main(tmp_path, "--config", cfg, "--seed", "0x10")
    assert doc["config"]["seed"] == 16
    assert doc["results"]["seed_range"] == [16, 26]


def test_assert_flag_reaches_exploration(tmp_path):
    cfg = write(tmp_path, {"command": "explore", "kernel": nn(0.5), "n": 3, "seed": 1,
                           "kernel_prime": nn(0.5, overrides=[{"displacement": [1, 0],
                                                               "value": 0.3}])})
    rc, doc, _ = run_main(tmp_path, "--config", cfg, "--assert", "full-trace")
    assert rc == 0
    assert len(doc["results"]["trace"]) == doc["results"]["stages"]


def test_json_config_accepted(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"command": "enumerate", "kernel": nn(0.5, d=1), "n": 1}))
    rc, doc, _ = run_main(tmp_path, "--config", str(path))
    assert rc == 0
    assert doc["results"]["support"] == [[1, 0.25], [2, 0.5], [3, 0.25]]


def test_csv_side_file(tmp_path):
    csv_path = tmp_path / "decay.csv"
    doc, rc = cli.run_config({"command": "decay", "kernel": nn(0.5, d=1), "n_list": [2, 3, 4],
                              "replicas": 2000, "csv": str(csv_path)})
    assert rc == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "n,theta,stderr" and len(rows) == 4


def test_kernel_families():
    phi = cli.build_kernel({"family": "polynomial-phi", "d": 1,
                            "params": {"beta": 1.0, "alpha": 3.0}})
    assert phi.value((2,)) == pytest.approx(0.1175030974, abs=1e-10)
    scaled = cli.build_kernel({"family": "product-scaled",
                               "params": {"inner": nn(0.3), "factor": 2.0}})
    assert scaled.value((1, 0)) == pytest.approx(0.6)
    oriented = cli.build_kernel({"family": "table", "d": 2, "orientation": "oriented",
                                 "params": {"entries": [{"displacement": [1, 1], "value": 0.7}]}})
    assert oriented.directed and oriented.is_oriented()
    over = cli.build_kernel(nn(0.5, overrides=[{"displacement": [1, 0], "value": 0.2}]))
    assert over.value((-1, 0)) == 0.2 and over.value((0, 1)) == 0.5


def test_accept_driver(tmp_path, capsys):
    cfg = write(tmp_path, {"command": "accept", "criteria": [4, 9], "scale": 0.01})
    rc, doc, _ = run_main(tmp_path, "--config", cfg)
    assert rc == 0 and doc["results"]["all_passed"]
    table = capsys.readouterr().err.splitlines()
    assert [line.split(":")[0] for line in table] == ["[PASS] criterion 4", "[PASS] criterion 9"]


def test_workers_do_not_change_results():
    J = nearest_neighbour(2, 0.5)
    a = simulate(J, 6, range(1000))
    set_workers(3)
    try:
        b = simulate(J, 6, range(1000))
    finally:
        set_workers(1)
    assert (a[0] == b[0]).all() and (a[1] == b[1]).all()


def test_missing_command(capsys):
    assert cli.main([]) == 2
