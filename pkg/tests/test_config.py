"""Tests for configuration loading and precedence."""

import pytest
from pydantic import ValidationError

from src.config import LifecycleConfig, TrackerConfig, load_config
from src.errors import ConfigError


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "fixcam.toml"
    path.write_text("[association]\nalpha = 2.0\nbeta = 0.25\n\n[tracker]\ntimeout = 12\n")
    return path


class TestDefaults:
    def test_documented_defaults(self):
        config = TrackerConfig()
        assert config.association.alpha == 1.0
        assert config.association.beta == 1.0
        assert config.association.gate == 1.5
        assert config.tracker.timeout == 30
        assert config.fingerprint.buffer_frames == 45
        assert config.fingerprint.dimension == 100

    def test_audit_all_default(self):
        _, audit = load_config()
        assert audit.sources["association.alpha"] == "default"
        assert audit.keys_from("cli") == []

    def test_frozen(self):
        config = TrackerConfig()
        with pytest.raises(ValidationError):
            config.tracker = LifecycleConfig(timeout=3)  # type: ignore[misc]


class TestPrecedence:
    """defaults < environment < file < CLI flags."""

    def test_file_values(self, config_file):
        config, audit = load_config(config_file)
        assert config.association.alpha == 2.0
        assert config.association.beta == 0.25
        assert config.association.gate == 1.5
        assert audit.keys_from("file") == ["association.alpha", "association.beta", "tracker.timeout"]

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("FIXCAM_ASSOCIATION__GATE", "2.5")
        config, audit = load_config()
        assert config.association.gate == 2.5
        assert audit.sources["association.gate"] == "env"

    def test_file_beats_environment(self, monkeypatch, config_file):
        monkeypatch.setenv("FIXCAM_ASSOCIATION__ALPHA", "9.0")
        monkeypatch.setenv("FIXCAM_ASSOCIATION__GATE", "2.5")
        config, audit = load_config(config_file)
        assert config.association.alpha == 2.0
        assert config.association.gate == 2.5
        assert audit.sources["association.alpha"] == "file"

    def test_cli_beats_file(self, config_file):
        config, audit = load_config(config_file, {"association.alpha": 0.5, "tracker.timeout": None})
        assert config.association.alpha == 0.5
        assert config.tracker.timeout == 12
        assert audit.sources["association.alpha"] == "cli"
        assert audit.sources["tracker.timeout"] == "file"


class TestValidation:
    """Bad configuration is a ConfigError naming the key."""

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[association]\ngamma = 1.0\n")
        with pytest.raises(ConfigError, match="gamma"):
            load_config(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[detector]\nthreshold = 0.3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_out_of_range(self):
        with pytest.raises(ConfigError, match="timeout"):
            load_config(overrides={"tracker.timeout": 0})

    def test_negative_weight(self):
        with pytest.raises(ConfigError, match="beta"):
            load_config(overrides={"association.beta": -1.0})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml")

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[association\nalpha = \n")
        with pytest.raises(ConfigError):
            load_config(path)
