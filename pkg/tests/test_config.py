"""Environment configuration."""

import pytest

from donning.app import main
from donning.config import Config


def test_config_is_not_instantiable():
    with pytest.raises(RuntimeError):
        Config()


def test_defaults():
    assert Config.SOURCE_MOUNT == "/source"
    assert Config.CONTROL_FILE == "donning.tasks"
    assert Config.DEFAULT_VERSION == "latest"


def test_exec_timeout(monkeypatch):
    monkeypatch.setattr(Config, "EXEC_TIMEOUT_SECS", "90")
    assert Config.exec_timeout() == 90.0
    Config.validate()


@pytest.mark.parametrize(
    "attr, value",
    [("EXEC_TIMEOUT_SECS", "soon"), ("EXEC_TIMEOUT_SECS", "0"), ("LOG_LEVEL", "CHATTY")],
)
def test_validate_rejects_bad_values(monkeypatch, attr, value):
    monkeypatch.setattr(Config, attr, value)
    with pytest.raises(EnvironmentError):
        Config.validate()


def test_bad_environment_exits_two(monkeypatch, capsys):
    monkeypatch.setattr(Config, "EXEC_TIMEOUT_SECS", "-1")
    assert main(["images"]) == 2
    assert "DONNING_TIMEOUT" in capsys.readouterr().err
