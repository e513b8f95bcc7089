import pytest

from survshap.settings import SurvShapSettings
from survshap.utils import sentry_logging


class FakeSentry:
    def __init__(self):
        self.init_calls = []
        self.tags = {}
        self.exceptions = []

    def init(self, **kwargs):
        self.init_calls.append(kwargs)

    def set_tag(self, key, value):
        self.tags[key] = value

    def capture_exception(self, error):
        self.exceptions.append(error)


@pytest.fixture
def fake_sentry(monkeypatch):
    fake = FakeSentry()
    monkeypatch.setattr(sentry_logging, "sentry_sdk", fake)
    monkeypatch.setattr(sentry_logging, "_initialized", False)
    monkeypatch.delenv("PYTEST_CURRENT_TEST", raising=False)
    return fake


def test_disabled_without_dsn(fake_sentry):
    sentry_logging.write_sentry({"command": "fit"}, SurvShapSettings(sentry_dsn=None))

    assert fake_sentry.init_calls == []
    assert fake_sentry.tags == {}


def test_disabled_by_usage_logging(fake_sentry):
    settings = SurvShapSettings(sentry_dsn="https://key@example.invalid/1", usage_logging=False)

    assert not sentry_logging.init_sentry(settings)


def test_tags_are_written_once_initialized(fake_sentry):
    settings = SurvShapSettings(sentry_dsn="https://key@example.invalid/1")

    sentry_logging.write_sentry({"command": "fit", "data": "/home/user/private/data.csv"}, settings)
    sentry_logging.write_sentry({"command": "explain"}, settings)

    assert len(fake_sentry.init_calls) == 1
    assert fake_sentry.tags["command"] == "explain"
    assert fake_sentry.tags["data"] == "data.csv"
    assert fake_sentry.tags["version"] == sentry_logging.version


def test_report_exception(fake_sentry):
    settings = SurvShapSettings(sentry_dsn="https://key@example.invalid/1")
    error = ValueError("bad input")

    sentry_logging.report_exception(error, settings)

    assert fake_sentry.exceptions == [error]


def test_silent_under_pytest(monkeypatch):
    monkeypatch.setenv("PYTEST_CURRENT_TEST", "test_sentry_logging.py::test_silent_under_pytest")

    settings = SurvShapSettings(sentry_dsn="https://key@example.invalid/1")

    assert not sentry_logging.init_sentry(settings)
