import pytest

from ecotable.cli import main as cli_main
from ecotable.pipeline import PipelineConfig, run_pipeline

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion for the end-of-run summary."""
    def record(number: int, ok: bool, detail: str = "") -> bool:
        CRITERIA[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def bundled_run(tmp_path_factory):
    """Full pipeline on the bundled sample, shared by the slower tests."""
    out = tmp_path_factory.mktemp("bundled")
    return run_pipeline(PipelineConfig(out_dir=out)), out


@pytest.fixture(scope="session")
def generated_run(tmp_path_factory):
    """Full pipeline on a freshly generated 100-train, 14-station instance."""
    src = tmp_path_factory.mktemp("generated")
    assert cli_main(["generate", "--stations", "14", "--trains", "100", "--headway", "1200", "--seed", "7",
                     "--out", str(src)]) == 0
    cfg = PipelineConfig(network=src / "network.json", limits=src / "speed_limits.csv",
                         physics=src / "physics.json", seed_timetable=src / "seed_timetable.csv",
                         out_dir=src / "out")
    return run_pipeline(cfg), src / "out"
