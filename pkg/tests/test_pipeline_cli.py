import json
from pathlib import Path

import numpy as np
import pytest

import koebe_fatou.pipeline as pipeline_module
from koebe_fatou.cli import main
from koebe_fatou.pipeline import (
    CORPUS,
    RunConfig,
    corpus_map,
    run_pipeline,
    search_mixed_cubic,
)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(map={"corpus": "z2"}, depth=0)
    with pytest.raises(ValueError):
        RunConfig(map={"corpus": "z2"}, depth=13)
    cfg = RunConfig(map={"corpus": "z2"})
    cfg.tolerances["lift"] = -1.0
    with pytest.raises(ValueError):
        RunConfig(map={"corpus": "z2"}, tolerances=cfg.tolerances)


def test_config_json_round_trip():
    cfg = RunConfig(map={"corpus": "z2+5"}, depth=4, seed=9)
    text = json.dumps(cfg.to_json_dict())
    back = RunConfig.from_json(text)
    assert back.depth == 4 and back.seed == 9
    assert back.rational_map().degree == 2


def test_pipeline_baseline_z2():
    report, code = run_pipeline(RunConfig(map={"corpus": "z2"}, depth=4))
    assert code == 0
    d = report.to_json_dict()
    assert d["schema"] == "koebe-fatou/1"
    assert d["forest_stats"]["trichotomy_violations"] == 0
    ends = d["ends"]["ends"]
    assert len(ends) == 1 and ends[0]["classification"] == "periodic"
    assert d["turning"]["reports"][0]["K_estimate"] == pytest.approx(1.0, abs=1e-6)
    hist = d["uniformization"]["residual_history"]
    assert hist[-1] < 1e-3


def test_pipeline_sections_always_present():
    report, _code = run_pipeline(RunConfig(map={"corpus": "z2"}, depth=4))
    for key in (
        "classification",
        "forest_stats",
        "ends",
        "turning",
        "fatness",
        "degree_tables",
        "uniformization",
    ):
        assert key in report.sections


def test_pipeline_deterministic_bytes():
    a, _ = run_pipeline(RunConfig(map={"corpus": "z2"}, depth=4, seed=5))
    b, _ = run_pipeline(RunConfig(map={"corpus": "z2"}, depth=4, seed=5))
    assert a.to_json() == b.to_json()


def test_pipeline_inadmissible_map_classifies_only():
    # z + 1/z is parabolic at infinity: undecided orbits gate the pipeline
    cfg = RunConfig(
        map={"num": [[1, 0], [0, 0], [1, 0]], "den": [[0, 0], [1, 0]]},
        depth=3,
        budgets={"orbit": 100, "pair_scan": 1000, "rounds": 5},
    )
    report, code = run_pipeline(cfg)
    assert code == 0
    assert "reports" in report.sections["classification"]
    for key in ("forest_stats", "turning", "uniformization"):
        assert "skipped" in report.sections[key]


def test_pipeline_stage_isolation_fault_injection(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("injected uniformizer fault")

    monkeypatch.setattr(pipeline_module, "koebe_uniformize", boom)
    report, code = run_pipeline(RunConfig(map={"corpus": "z2"}, depth=4))
    assert code == 3
    assert "injected" in report.sections["uniformization"]["skipped"]
    # earlier sections intact
    assert report.sections["turning"]["reports"]
    assert report.sections["fatness"]["reports"]
    assert report.sections["forest_stats"]["trichotomy_violations"] == 0


def test_search_confirms_committed_fixture():
    a = np.asarray([CORPUS["mixed-cubic"]["a"]])
    b = np.asarray([CORPUS["mixed-cubic"]["b"]])
    hits = search_mixed_cubic(a, b)
    assert len(hits) == 1
    assert hits[0]["period"] == 3
    assert hits[0]["multiplier_modulus"] < 0.5


def test_search_excludes_double_escape_and_chebyshev():
    hits = search_mixed_cubic(np.asarray([1.0]), np.asarray([50.0]))
    assert hits == []  # both critical orbits escape for huge b
    hits = search_mixed_cubic(np.asarray([1.0]), np.asarray([0.0]))
    assert hits == []  # z^3 - 3z lands on repelling fixed points


def test_corpus_maps_construct():
    for name in CORPUS:
        f = corpus_map(name)
        assert f.degree in (2, 3)


def test_cli_classify_stdout(capsys):
    code = main(["classify", "--map", "z2"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert "classification" in out and "schema" in out


def test_cli_pipeline_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = main(["pipeline", "--map", "z2", "--depth", "4", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["schema"] == "koebe-fatou/1"
    assert (out / "residuals.csv").read_text().startswith("round,max_circularity")
    assert (out / "circles.svg").read_text().startswith("<svg")
    assert (out / "degrees.csv").exists()


def test_cli_render_reproducible(tmp_path):
    run_dir = tmp_path / "run"
    main(["pipeline", "--map", "z2", "--depth", "4", "--out", str(run_dir)])
    r1 = tmp_path / "r1"
    r2 = tmp_path / "r2"
    for target in (r1, r2):
        main(["render", "--report", str(run_dir / "report.json"), "--out", str(target)])
    for name in ("report.json", "circles.svg", "residuals.csv"):
        assert (r1 / name).read_bytes() == (r2 / name).read_bytes()


def test_cli_search_subcommand(tmp_path, capsys):
    a = repr(CORPUS["mixed-cubic"]["a"])
    b = repr(CORPUS["mixed-cubic"]["b"])
    code = main(
        ["search", "--a-range", a, a, "1", "--b-range", b, b, "1"]
    )
    assert code == 0
    hits = json.loads(capsys.readouterr().out)["hits"]
    assert len(hits) == 1


def test_cli_unknown_map_errors():
    assert main(["classify", "--map", "not-a-map"]) == 3


def test_cli_exit_code_on_bad_config(tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"map": {"corpus": "z2"}, "depth": 99}))
    assert main(["pipeline", "--config", str(bad)]) == 3
