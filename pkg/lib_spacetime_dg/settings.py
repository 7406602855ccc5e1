import configparser
from pathlib import Path
from typing import Any, Dict, Optional, Union

from django.conf import settings
from django.core.signals import setting_changed
from rest_framework.settings import APISettings

from .exceptions import ConfigurationError

# Django setting holding the user overrides, e.g. SPACETIME_STUDY = {"STEPS": 4}
SETTINGS_NAME = "SPACETIME_STUDY"

# section name given to the flat config file
SECTION = "study"

DEFAULTS: Dict = {
    "DIM": 2,
    "SPATIAL_DEGREE": 1,
    "TEMPORAL_DEGREE": 1,
    "SUPPORT_TYPE": "lobatto",
    "END_TIME": 1.0,
    "N_INTERVALS": 4,
    "N_REFINEMENTS": 3,
    "N_MAX": 0,
    "STEPS": 3,
    "REFINE_MODE": "kh",
    "SOLVER": "gmres",
    "RTOL": 1e-12,
    "MAX_ITER": 5000,
    "RESTART": 50,
    "ASSEMBLY_WORKERS": 1,
    "RECORD_TIMINGS": True,
    "COMPARE_SUPPORT_TYPES": False,
    "CSV": None,
    "VTK": None,
    "VTK_SLICES": 5,
    "JSON": None,
    "LOG_LEVEL": "INFO",
    "DEBUG": False,
    "EXCEPTION_REPORTING": "lib_spacetime_dg.handler.exception_reporter",
}

# List of settings that may be in string import notation.
# e.g. `lib_spacetime_dg.handler.exception_reporter`
IMPORT_STRINGS = ("EXCEPTION_REPORTING",)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce_value(key: str, raw: Any) -> Any:
    """
    Converts a raw (usually textual) value to the type of the matching default.
    Settings whose default is None are kept as text.
    """
    if key not in DEFAULTS:
        raise ConfigurationError("Unknown setting %(key)s.", code="unknown_key", params={"key": key}, attr=key)
    if not isinstance(raw, str):
        return raw

    default = DEFAULTS[key]
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigurationError(
            "Setting %(key)s expects a %(kind)s, got %(value)r.",
            code="invalid_type",
            params={"key": key, "kind": type(default).__name__, "value": text},
            attr=key,
        )
    if default is None and text.lower() in {"", "none"}:
        return None
    return text


def _malformed(path: Path, reason: Any) -> ConfigurationError:
    return ConfigurationError(
        "Malformed config file %(path)s: %(reason)s",
        code="malformed",
        params={"path": str(path), "reason": reason},
        attr="config",
    )


def load_settings_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Reads a flat `key = value` file with `#` comments into upper-case settings.
    Section headers, `key: value` pairs and indented continuation lines are rejected.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(
            "Cannot read config file %(path)s: %(reason)s",
            code="unreadable",
            params={"path": str(path), "reason": exc.strerror or exc},
            attr="config",
        )

    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            raise _malformed(path, "section header on line %d" % number)
        if line[0].isspace():
            raise _malformed(path, "indented line %d" % number)

    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        parser.read_string("[%s]\n" % SECTION + text, source=str(path))
    except configparser.Error as exc:
        raise _malformed(path, exc.message)
    return {key.upper(): coerce_value(key.upper(), value) for key, value in parser.items(SECTION)}


class StudySettings(APISettings):
    """
    DRF settings object whose user values live in the Django setting named
    SETTINGS_NAME instead of REST_FRAMEWORK.
    """

    @property
    def user_settings(self) -> Dict:
        if not hasattr(self, "_user_settings"):
            self._user_settings = getattr(settings, SETTINGS_NAME, None) or {}
        return self._user_settings


study_settings: StudySettings = StudySettings(None, DEFAULTS, IMPORT_STRINGS)


def update_study_settings(user_settings: Optional[Dict] = None) -> StudySettings:
    setattr(settings, SETTINGS_NAME, dict(user_settings or {}))
    study_settings.reload()
    return study_settings


def reload_study_settings(*args, **kwargs) -> None:
    if kwargs["setting"] == SETTINGS_NAME:
        study_settings.reload()


setting_changed.connect(reload_study_settings)
