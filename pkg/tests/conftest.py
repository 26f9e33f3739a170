import os
import warnings
from pathlib import Path

import pytest
import yaml
from hypothesis import HealthCheck, settings

from hmdpose.config import RunConfig
from hmdpose.dataset import extract_cohort
from hmdpose.synth import CohortConfig, generate_cohort

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
E2E_CONFIG = ROOT / "configs" / "synthetic_multilabel.yaml"


def e2e_config(output_dir, **overrides) -> RunConfig:
    data = yaml.safe_load(E2E_CONFIG.read_text(encoding="utf-8"))
    data.update(output_dir=str(output_dir), **overrides)
    return RunConfig.from_dict(data)


@pytest.fixture(scope="session")
def default_cohort():
    return generate_cohort(CohortConfig())


@pytest.fixture(scope="session")
def default_records(default_cohort):
    series, _ = default_cohort
    records, _ = extract_cohort(series)
    return records


@pytest.fixture(scope="session")
def small_cohort():
    """Fast cohort for plumbing tests (12 windows per subject)."""
    series, manifest = generate_cohort(CohortConfig(windows_per_subject=12))
    records, report = extract_cohort(series)
    return series, manifest, records, report


@pytest.fixture(scope="session")
def e2e_run(default_records, tmp_path_factory):
    """The synthetic multi-label run from configs/, timed."""
    import time

    from hmdpose.experiments import run_multilabel

    cfg = e2e_config(tmp_path_factory.mktemp("e2e"))
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_multilabel(cfg, default_records)
    res["elapsed"] = time.perf_counter() - t0
    res["config"] = cfg
    return res


# ---------------------------------------------------------------- acceptance summary

_DETAILS: dict[str, str] = {}
_OUTCOMES: dict[str, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance check; fails the test when ``ok`` is false."""
    def record(name: str, ok: bool, detail: str = ""):
        _DETAILS[request.node.nodeid] = f"{name}: {detail}"
        assert ok, f"{name}: {detail}"
    return record


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[report.nodeid] = (report.outcome, report.nodeid.split("::")[-1])


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (outcome, name) in _OUTCOMES.items():
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {_DETAILS.get(nodeid, name)}")
