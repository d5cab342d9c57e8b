import os
import textwrap

import numpy as np
import pytest
import yaml

from dsst.cli import main
from dsst.config import build_scenario, emit_config, load_config, parse_config
from dsst.detect import is_dsst_solvable
from dsst.errors import ConfigError
from dsst.model import LtiSystem

HERE = os.path.dirname(__file__)
REFERENCE = os.path.join(HERE, "..", "scenarios", "reference.yaml")


def scalar_config(p=5, s=1, edges=None, mode="identity", T=30, attack=""):
    if edges is None:
        edges = [[i + 1, (i + 1) % p + 1] for i in range(p)]
    C = [[1.0]] * p
    return textwrap.dedent(
        f"""\
        version: 1
        system: {{A: [[2.0]], C: {C}}}
        graph: {{p: {p}, edges: {edges}}}
        security:
          s: {s}
          attack: [{attack}]
        compression: {{mode: {mode}}}
        run: {{T: {T}, x0: [1.0]}}
        """
    )


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_reference_config_round_trip():
    cfg = load_config(REFERENCE)
    text = emit_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert emit_config(again) == text


def test_defaults_filled():
    cfg = parse_config(scalar_config())
    assert cfg.tracker == {"gains": "auto", "epsilon": 1e-6}
    assert cfg.run["decode_cadence"] == 1 and cfg.run["seed"] == 0
    assert cfg.output == {"trace": "trace.csv", "summary": "summary.yaml"}


@pytest.mark.parametrize(
    "mutate, field, line",
    [
        (lambda t: t.replace("version: 1", "version: 1\nbogus: 3"), "bogus", 2),
        (lambda t: t.replace("s: 1", "s: -1"), "security.s", 5),
        (lambda t: t.replace("mode: identity", "mode: fancy"), "compression.mode", 7),
        (lambda t: t.replace("x0: [1.0]", "x0: [1.0, 2.0]"), "run.x0", 8),
        (lambda t: t.replace("version: 1", "version: 2"), "version", 1),
    ],
)
def test_errors_have_field_and_line(mutate, field, line):
    with pytest.raises(ConfigError) as err:
        parse_config(mutate(scalar_config()))
    assert err.value.path == field
    assert err.value.line == line


def test_graph_errors_are_one_based():
    with pytest.raises(ConfigError) as err:
        parse_config(scalar_config(p=3, edges=[[1, 1]]))
    assert "1-based" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config(scalar_config(p=3, edges=[[1, 4]]))


def test_yaml_syntax_error():
    with pytest.raises(ConfigError) as err:
        parse_config("version: 1\nsystem: [\n")
    assert err.value.line is not None


def test_attack_entries():
    cfg = parse_config(
        scalar_config(attack="{node: 2, kind: jump, t0: 4, offset: 1.5}, {node: 5, kind: consistent_fake_state, x0: [3]}", s=2)
    )
    sc, _ = build_scenario(cfg)
    assert sc.attack.support == (1, 4)
    with pytest.raises(ConfigError):
        parse_config(scalar_config(attack="{node: 2, kind: jump, t0: 4}"))
    with pytest.raises(ConfigError):
        parse_config(scalar_config(attack="{node: 9, kind: jump, t0: 4, offset: 1}"))


def test_check_examples(tmp_path, capsys):
    assert main(["check", "--config", REFERENCE]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["verdict"].startswith("solvable")

    assert main(["check", "--config", write(tmp_path, scalar_config(s=3))]) == 1
    assert yaml.safe_load(capsys.readouterr().out)["verdict"] == "not solvable (index 4 < 6)"

    disconnected = scalar_config(p=4, edges=[[1, 2]])
    assert main(["check", "--config", write(tmp_path, disconnected)]) == 1
    doc = yaml.safe_load(capsys.readouterr().out)
    conn = next(c for c in doc["checks"] if c["name"] == "connectivity")
    assert not conn["passed"] and "disconnected" in conn["detail"]


def test_parse_and_io_errors_exit_2(tmp_path, capsys):
    assert main(["check", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["check", "--config", write(tmp_path, "version: 1\nfoo: 2\n")]) == 2
    assert "foo" in capsys.readouterr().err


def test_run_reference(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", REFERENCE, "--out", str(out)]) == 0
    summary = yaml.safe_load((out / "summary.yaml").read_text())
    assert max(summary["final_x_err"]) < 1e-6
    assert summary["beta"] > 0 and summary["fitted_rates"]["w_err"] < 1
    assert summary["final_support"] == ["3"] * 5
    lines = (out / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 500 * 5


def test_run_reproducible_bytes(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", REFERENCE, "--out", str(a), "--seed", "4"])
    main(["run", "--config", REFERENCE, "--out", str(b), "--seed", "4"])
    for name in ("trace.csv", "summary.yaml"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_refuses_then_forces(tmp_path, capsys):
    bad = write(tmp_path, scalar_config(p=3, edges=[[1, 2], [2, 3]], T=200))
    assert main(["run", "--config", bad, "--out", str(tmp_path)]) == 1
    assert "refusing" in capsys.readouterr().err
    assert main(["run", "--config", bad, "--out", str(tmp_path), "--force"]) == 0
    summary = yaml.safe_load((tmp_path / "summary.yaml").read_text())
    assert summary["forced"] and summary["diverged"]


def test_run_empty_horizon(tmp_path, capsys):
    cfg = write(tmp_path, scalar_config(T=0, p=5))
    main(["run", "--config", cfg, "--out", str(tmp_path), "--force"])
    assert (tmp_path / "trace.csv").read_text().strip().count("\n") == 0


def test_design_d_examples(tmp_path, capsys):
    assert main(["design-d", "--config", REFERENCE]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    assert np.array_equal(doc["D"], np.eye(5)) and doc["certified"]

    cfg = write(tmp_path, scalar_config(mode="design"))
    assert main(["design-d", "--config", cfg, "--seed", "2"]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    from dsst.compress import validate_compression

    sys = LtiSystem([[2.0]], np.ones((5, 1)))
    assert doc["v"] <= 5
    validate_compression(sys, np.array(doc["D"]), 1)
    assert main(["design-d", "--config", cfg, "--seed", "2"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["D"] == doc["D"]

    assert main(["design-d", "--config", write(tmp_path, scalar_config(s=3, mode="design"))]) == 1
    doc = yaml.safe_load(capsys.readouterr().out)
    assert not doc["certified"] and "cannot support secure tracking" in doc["reason"]


def test_decode_command(tmp_path, capsys):
    cfg = write(tmp_path, scalar_config())
    assert main(["decode", "--config", cfg, "--w", "0.2,0.2,0.2,-0.6,0.2"]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    assert doc["x_hat"] == pytest.approx([1.0]) and doc["support_hat"] == [4]
    wfile = tmp_path / "w.yaml"
    wfile.write_text("W: [0.4, 0.4, 0.4, 0.4, 0.4]\n")
    assert main(["decode", "--config", cfg, "--w", str(wfile)]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    assert doc["x_hat"] == pytest.approx([2.0]) and doc["support_hat"] == []
    assert main(["decode", "--config", cfg, "--w", "1,2"]) == 2


def test_check_verdict_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(99)
    for k in range(50):
        n, p = int(rng.integers(1, 3)), int(rng.integers(2, 6))
        A = np.diag(rng.choice([0.5, 1.2, 2.0], size=n))
        C = np.round(rng.standard_normal((p, n)) * (rng.random((p, n)) > 0.4), 3)
        s = int(rng.integers(0, 3))
        text = yaml.safe_dump(
            {
                "version": 1,
                "system": {"A": A.tolist(), "C": C.tolist()},
                "graph": {"p": p, "edges": [[i + 1, i + 2] for i in range(p - 1)]},
                "security": {"s": s},
                "run": {"x0": [1.0] * n},
            }
        )
        main(["check", "--config", write(tmp_path, text)])
        doc = yaml.safe_load(capsys.readouterr().out)
        verdict = doc["verdict"].startswith("solvable")
        assert verdict == is_dsst_solvable(LtiSystem(A, C), s), k
