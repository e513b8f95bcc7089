"""Log usage and failures of this package to Sentry, when a DSN is configured"""

import importlib.metadata
import logging
import os

import sentry_sdk

from survshap.settings import SurvShapSettings

log = logging.getLogger(__name__)

try:
    version = importlib.metadata.version("survshap")
except importlib.metadata.PackageNotFoundError:
    version = "unknown"

_initialized = False


def init_sentry(settings: SurvShapSettings) -> bool:
    """Start the Sentry client once, returns whether reporting is active"""
    global _initialized
    if settings.sentry_dsn is None or not settings.usage_logging:
        return False
    if os.getenv("PYTEST_CURRENT_TEST") is not None:
        return False
    if not _initialized:
        sentry_sdk.init(dsn=settings.sentry_dsn, traces_sample_rate=1.0, release=version)
        _initialized = True
    return True


def write_sentry(params: dict, settings: SurvShapSettings | None = None):
    """
    Log usage of this package to Sentry
    """
    settings = SurvShapSettings() if settings is None else settings
    if not init_sentry(settings):
        return

    try:
        for key, value in params.items():
            # paths can name private locations, only their file names are kept
            if isinstance(value, str) and os.sep in value:
                value = os.path.basename(value)

            sentry_sdk.set_tag(key, value)

        sentry_sdk.set_tag("version", version)

    except Exception as e:  # noqa
        log.debug(f"Could not tag the Sentry scope: {e}")


def report_exception(error: BaseException, settings: SurvShapSettings | None = None):
    settings = SurvShapSettings() if settings is None else settings
    if init_sentry(settings):
        sentry_sdk.capture_exception(error)
