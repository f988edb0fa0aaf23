import pytest

from main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main


def test_validate_ok(data_dir, capsys):
    assert main(["validate", "--config", str(data_dir / "experiments" / "t2.yaml")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "config OK" in out
    assert "locations" in out


def test_missing_config_is_a_config_error(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_schema_violation_is_a_config_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("scenario: {}\nmethods: [bo]\nbudget: 0\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_bad_worker_count_is_a_config_error(data_dir, tmp_path):
    argv = ["run", "--config", str(data_dir / "experiments" / "desk.yaml"), "--out", str(tmp_path), "--workers", "0"]
    assert main(argv) == EXIT_CONFIG


def test_report_on_empty_dir_is_a_runtime_failure(tmp_path):
    assert main(["report", "--in", str(tmp_path)]) == EXIT_RUNTIME


def test_replay_needs_existing_log(data_dir, tmp_path):
    argv = ["replay", "--casas", str(tmp_path / "missing.txt"), "--config", str(data_dir / "experiments" / "aruba.yaml")]
    assert main(argv) == EXIT_CONFIG


def test_replay_and_report(data_dir, tmp_path, capsys):
    config = tmp_path / "replay.yaml"
    config.write_text(
        "name: tiny\n"
        "scenario: {casas: placeholder}\n"
        "mode: replay\n"
        "methods: [bo, dgbo]\n"
        "sensor_counts: [2]\n"
        "seeds: [0, 1]\n"
        "budget: 4\n"
        "classifier: {n_trees: 5}\n"
        "replay: {period_seconds: 60}\n"
        "surrogate: {n_trees: 5}\n"
        "objective: {prior_budget_mode: free}\n"
        "sampler: {n_random: 20, n_neighbors: 20}\n"
        "dgbo: {snapshot_every: 1}\n"
    )
    out = tmp_path / "out"
    casas = data_dir / "casas" / "aruba_fixture.txt"
    assert main(["replay", "--casas", str(casas), "--config", str(config), "--out", str(out)]) == EXIT_OK
    assert (out / "summary.csv").exists()

    assert main(["report", "--in", str(out), "--convergence", "--heatmap", "--profile-iter", "1"]) == EXIT_OK
    assert (out / "convergence.csv").exists()
    assert (out / "heatmap_dgbo_eps_replay_D_2.pgm").exists()
    assert "profile_eps_replay_D_2_seed_1_iter_1.csv" in capsys.readouterr().out


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
