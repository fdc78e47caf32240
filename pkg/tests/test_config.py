import pytest

from config import DEFAULT_LP_MAX_ROWS, DEFAULT_PARALLELISM, Config


@pytest.fixture(autouse=True)
def restore_config(monkeypatch):
    """Re-read the real environment once the test's overrides are undone."""
    yield
    monkeypatch.undo()
    Config()


def test_config_singleton():
    """Test that Config returns the same instance."""
    config1 = Config()
    config2 = Config()
    assert config1 is config2


def test_defaults(monkeypatch):
    """Unset variables fall back to the defaults."""
    monkeypatch.delenv('ROBUST_AM_PARALLELISM', raising=False)
    monkeypatch.delenv('ROBUST_AM_LP_MAX_ROWS', raising=False)
    monkeypatch.delenv('ROBUST_AM_LOG_LEVEL', raising=False)

    config = Config()
    assert config.parallelism == DEFAULT_PARALLELISM
    assert config.lp_max_rows == DEFAULT_LP_MAX_ROWS
    assert config.log_level == 'INFO'


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv('ROBUST_AM_PARALLELISM', '8')
    monkeypatch.setenv('ROBUST_AM_LP_MAX_ROWS', ' 512 ')
    monkeypatch.setenv('ROBUST_AM_LOG_LEVEL', 'debug')

    config = Config()
    assert config.parallelism == 8
    assert config.lp_max_rows == 512
    assert config.log_level == 'DEBUG'


def test_empty_value_uses_default(monkeypatch):
    monkeypatch.setenv('ROBUST_AM_PARALLELISM', '')
    assert Config().parallelism == DEFAULT_PARALLELISM


def test_non_integer_parallelism(monkeypatch):
    """Test that a non-numeric worker count raises ValueError."""
    monkeypatch.setenv('ROBUST_AM_PARALLELISM', 'many')

    with pytest.raises(ValueError, match="ROBUST_AM_PARALLELISM must be an integer"):
        Config()


def test_non_positive_row_cap(monkeypatch):
    monkeypatch.setenv('ROBUST_AM_LP_MAX_ROWS', '0')

    with pytest.raises(ValueError, match="must be at least 1"):
        Config()


def test_invalid_log_level(monkeypatch):
    monkeypatch.setenv('ROBUST_AM_LOG_LEVEL', 'chatty')

    with pytest.raises(ValueError, match="not a valid logging level"):
        Config()
