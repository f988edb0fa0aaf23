from pathlib import Path

import pytest

from config import ConfigurationError, get_config


@pytest.fixture
def settings(monkeypatch):
    for key in ("GREYPLACE_WORKERS", "GREYPLACE_LOG_LEVEL", "GREYPLACE_OUT_DIR", "GREYPLACE_ARUBA_PATH"):
        monkeypatch.delenv(key, raising=False)
    config = get_config()
    yield config
    monkeypatch.undo()
    config.reload()


def test_defaults(settings):
    assert settings.seed_override is None
    assert settings.workers == 1
    assert settings.log_level == "INFO"
    assert settings.out_dir == Path("runs")
    assert settings.aruba_path is None


def test_environment_values(settings, monkeypatch):
    monkeypatch.setenv("GREYPLACE_SEED", "3, 4,5")
    monkeypatch.setenv("GREYPLACE_WORKERS", "4")
    monkeypatch.setenv("GREYPLACE_LOG_LEVEL", "debug")
    monkeypatch.setenv("GREYPLACE_ARUBA_PATH", "/data/aruba.txt")
    settings.reload()
    assert settings.seed_override == [3, 4, 5]
    assert settings.workers == 4
    assert settings.log_level == "DEBUG"
    assert settings.aruba_path == Path("/data/aruba.txt")


def test_invalid_values_are_reported_together(settings, monkeypatch):
    monkeypatch.setenv("GREYPLACE_SEED", "1,x")
    monkeypatch.setenv("GREYPLACE_WORKERS", "0")
    monkeypatch.setenv("GREYPLACE_LOG_LEVEL", "LOUD")
    with pytest.raises(ConfigurationError) as exc:
        settings.reload()
    message = str(exc.value)
    assert "GREYPLACE_SEED" in message
    assert "GREYPLACE_WORKERS" in message
    assert "GREYPLACE_LOG_LEVEL" in message


def test_missing_env_file(settings, tmp_path):
    with pytest.raises(ConfigurationError):
        settings.reload(str(tmp_path / "missing.env"))


def test_required_key(settings, monkeypatch):
    monkeypatch.delenv("GREYPLACE_TEST_KEY", raising=False)
    assert settings.get("GREYPLACE_TEST_KEY", "fallback") == "fallback"
    with pytest.raises(ConfigurationError):
        settings.get("GREYPLACE_TEST_KEY", required=True)


def test_seed_override_changed_after_load(settings, monkeypatch):
    monkeypatch.setenv("GREYPLACE_SEED", "one")
    with pytest.raises(ConfigurationError):
        settings.seed_override
