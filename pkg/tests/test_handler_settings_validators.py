import logging

import pytest
from django.conf import settings
from django.test import override_settings
from rest_framework.exceptions import ErrorDetail

from lib_spacetime_dg.custom_handler import custom_exception_handler
from lib_spacetime_dg.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    OutputError,
    SingularMatrixError,
    SolverError,
    SpaceTimeError,
)
from lib_spacetime_dg.handler import exception_handler, exception_reporter
from lib_spacetime_dg.renderer import EXIT_MESSAGES, SummaryRenderer, envelope, render_table
from lib_spacetime_dg.settings import (
    DEFAULTS,
    IMPORT_STRINGS,
    SETTINGS_NAME,
    StudySettings,
    coerce_value,
    load_settings_file,
    study_settings,
    update_study_settings,
)
from lib_spacetime_dg.validators import ChoiceValidator, PositiveValidator, RangeValidator, RequiredValidator

REPORTED = []


def recording_reporter(exc, context=None):
    REPORTED.append((type(exc).__name__, (context or {}).get("operation")))


def test_error_detail_carries_code():
    exc = DimensionMismatchError(params={"expected": 4, "actual": 3})
    assert isinstance(exc.detail, ErrorDetail)
    assert exc.detail == ErrorDetail("Expected size 4, got 3.", code="dimension_mismatch")
    assert exc.detail != ErrorDetail("Expected size 4, got 3.", code="other")
    assert exc.params == {"expected": 4, "actual": 3}
    assert SpaceTimeError("100% done").detail == "100% done"


def test_exception_defaults():
    exc = DimensionMismatchError(params={"expected": 4, "actual": 3})
    assert str(exc) == "Expected size 4, got 3."
    assert exc.get_codes() == "dimension_mismatch"
    assert isinstance(exc, ValueError)
    assert exc.exit_code == 1
    assert ConfigurationError().exit_code == 2
    assert ConfigurationError(code="custom").get_codes() == "custom"


def test_solver_errors_keep_context():
    exc = SolverError(slab_index=3, iterations=40)
    assert (exc.slab_index, exc.iterations) == (3, 40)
    singular = SingularMatrixError(params={"pivot": 0.0, "row": 2})
    assert isinstance(singular, SolverError)
    assert singular.get_codes() == "singular_matrix"
    assert singular.slab_index is None


def test_output_error_is_os_error():
    exc = OutputError(params={"path": "/tmp/x.csv", "reason": "denied"})
    assert isinstance(exc, OSError)
    assert exc.path == "/tmp/x.csv"
    assert str(exc) == "Could not write /tmp/x.csv: denied"


@pytest.mark.parametrize("exc, expected", [
    (ConfigurationError("bad", attr="r"), ("configuration_error", "invalid", "bad", "r", 2)),
    (SolverError(slab_index=1), ("solver_error", "not_converged",
                                 "Linear solver did not reach the requested tolerance.", None, 1)),
    (ValueError("broken"), ("configuration_error", "error", "broken", None, 2)),
    (ZeroDivisionError(), ("linear_algebra_error", "error", "An unexpected error occurred.", None, 1)),
    (FileNotFoundError("gone"), ("io_error", "error", "gone", None, 1)),
    (KeyError("x"), ("internal_error", "error", "'x'", None, 1)),
])
def test_exception_handler_report(exc, expected):
    report = exception_handler(exc, {"operation": "test"})
    assert (report["type"], report["code"], report["detail"], report["attr"], report["exit_code"]) == expected


def test_debug_lets_unexpected_errors_through():
    update_study_settings({"DEBUG": True})
    assert exception_handler(RuntimeError("boom")) is None
    assert custom_exception_handler(RuntimeError("boom")) is None
    assert exception_handler(ConfigurationError())["exit_code"] == 2


def test_custom_exception_handler_envelope():
    result = custom_exception_handler(ConfigurationError("bad", attr="dim"), {"operation": "study"})
    assert result["status_code"] == 2
    assert result["is_success"] is False
    assert result["message"] == EXIT_MESSAGES[2]
    assert result["response"] is None
    assert result["error"]["attr"] == "dim"


def test_reporter_is_configurable():
    REPORTED.clear()
    update_study_settings({"EXCEPTION_REPORTING": "tests.test_handler_settings_validators.recording_reporter"})
    exception_handler(SolverError(), {"operation": "march"})
    assert REPORTED == [("SolverError", "march")]


def test_default_reporter_logs(caplog):
    with caplog.at_level(logging.ERROR, logger="lib_spacetime_dg.handler"):
        exception_reporter(SolverError(slab_index=5, iterations=12))
        exception_reporter(OutputError(params={"path": "a.csv", "reason": "full"}))
    assert "slab 5 after 12 iterations" in caplog.text
    assert "output failure for a.csv" in caplog.text


def test_envelope():
    assert envelope(0, {"rows": []}) == {
        "status_code": 0,
        "message": EXIT_MESSAGES[0],
        "is_success": True,
        "error": None,
        "response": {"rows": []},
    }
    assert envelope(7)["message"] == EXIT_MESSAGES[1]


def test_summary_renderer_write_failure(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    renderer = SummaryRenderer()
    assert renderer.render(renderer.build([])).startswith("{")
    with pytest.raises(OutputError):
        renderer.write(renderer.build([]), blocker / "summary.json")


def test_render_table_marks_missing_order():
    class Row:
        level, M, Nx, dofs, error, eoc, seconds = 0, 4, 9, 72, 0.5, None, 0.0

    header, line = render_table([Row()]).splitlines()
    assert header.split() == ["level", "M", "Nx", "dofs", "error", "eoc", "seconds"]
    assert line.split()[5] == "-"


@pytest.mark.parametrize("key, raw, expected", [
    ("TEMPORAL_DEGREE", "2", 2),
    ("RTOL", "1e-8", 1e-8),
    ("RECORD_TIMINGS", "Off", False),
    ("COMPARE_SUPPORT_TYPES", "yes", True),
    ("CSV", "out/study.csv", "out/study.csv"),
    ("CSV", "none", None),
    ("SUPPORT_TYPE", " legendre ", "legendre"),
    ("N_MAX", 3, 3),
])
def test_coerce_value(key, raw, expected):
    assert coerce_value(key, raw) == expected


def test_coerce_value_errors():
    with pytest.raises(ConfigurationError) as info:
        coerce_value("STEPS", "three")
    assert info.value.get_codes() == "invalid_type"
    with pytest.raises(ConfigurationError) as info:
        coerce_value("DEBUG", "maybe")
    assert info.value.attr == "DEBUG"
    with pytest.raises(ConfigurationError) as info:
        coerce_value("MESH", "1")
    assert info.value.get_codes() == "unknown_key"


def test_load_settings_file(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text("refine_mode = k\nSPATIAL_DEGREE = 2\n\n# end_time = 4\n")
    assert load_settings_file(path) == {"REFINE_MODE": "k", "SPATIAL_DEGREE": 2}

    path.write_text("no separator here\n")
    with pytest.raises(ConfigurationError) as info:
        load_settings_file(path)
    assert info.value.get_codes() == "malformed"

    with pytest.raises(ConfigurationError) as info:
        load_settings_file(tmp_path / "absent.cfg")
    assert info.value.get_codes() == "unreadable"


@pytest.mark.parametrize("text", [
    "steps = 2\n[solver]\nrtol = 1e-8\n",
    "[study]\nsteps = 2\n",
    "steps: 2\n",
    "csv = out.csv\n  more.csv\n",
    "steps = 2\nsteps = 3\n",
])
def test_load_settings_file_rejects_non_flat_files(tmp_path, text):
    path = tmp_path / "study.cfg"
    path.write_text(text)
    with pytest.raises(ConfigurationError) as info:
        load_settings_file(path)
    assert info.value.get_codes() == "malformed"
    assert info.value.exit_code == 2


def test_load_settings_file_allows_colons_in_values(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text("csv = C:/runs/study.csv\n    # indented comment\n")
    assert load_settings_file(path) == {"CSV": "C:/runs/study.csv"}


def test_settings_object():
    study = StudySettings({"STEPS": 5}, DEFAULTS, IMPORT_STRINGS)
    assert study.STEPS == 5
    assert study.N_MAX == 0
    assert callable(study.EXCEPTION_REPORTING)
    with pytest.raises(AttributeError):
        study.MESH

    study.reload()
    assert study.STEPS == DEFAULTS["STEPS"]


def test_update_study_settings():
    update_study_settings({"STEPS": 1, "SOLVER": "direct"})
    assert getattr(settings, SETTINGS_NAME) == {"STEPS": 1, "SOLVER": "direct"}
    assert (study_settings.STEPS, study_settings.SOLVER) == (1, "direct")

    update_study_settings()
    assert study_settings.STEPS == DEFAULTS["STEPS"]


def test_study_settings_follow_django_overrides():
    with override_settings(**{SETTINGS_NAME: {"N_MAX": 4}}):
        assert study_settings.N_MAX == 4
    assert study_settings.N_MAX == DEFAULTS["N_MAX"]


def test_exception_reporting_import_string():
    assert study_settings.EXCEPTION_REPORTING is exception_reporter
    update_study_settings({"EXCEPTION_REPORTING": "lib_spacetime_dg.handler.missing"})
    with pytest.raises(ImportError):
        study_settings.EXCEPTION_REPORTING


def test_validators():
    assert RangeValidator("r", 0, 10)(3) == 3
    assert ChoiceValidator("mode", ("h", "k"))(" K ") == "k"
    assert PositiveValidator("rtol")(1e-12) == 1e-12
    assert RequiredValidator("csv")("a.csv") == "a.csv"

    with pytest.raises(ConfigurationError) as info:
        RangeValidator("r", 0, 10)(True)
    assert info.value.get_codes() == "out_of_range"
    with pytest.raises(ConfigurationError) as info:
        PositiveValidator("end_time")(float("inf"))
    assert str(info.value) == "end_time must be positive, got inf."
    with pytest.raises(ConfigurationError) as info:
        ChoiceValidator("mode", ("h", "k"), message="pick %(choices)s")("x")
    assert str(info.value) == "pick h, k"
    with pytest.raises(SpaceTimeError):
        RequiredValidator("csv")("")
