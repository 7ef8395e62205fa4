import pytest
from hypothesis import HealthCheck, settings

from llens.curve import BadPrime, CurveSpec, ReductionType
from llens.curvefile import bundled_curve
from llens.precision import DEFAULT_PRECISION

settings.register_profile(
    "llens", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("llens")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("LLENS_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture
def cfg():
    return DEFAULT_PRECISION


@pytest.fixture
def ctx():
    return DEFAULT_PRECISION.ctx


@pytest.fixture(scope="session")
def c11():
    return bundled_curve("11a1").spec


@pytest.fixture(scope="session")
def c15():
    return bundled_curve("15a1").spec


@pytest.fixture(scope="session")
def c36():
    return bundled_curve("36a1").spec


@pytest.fixture(scope="session")
def c37():
    return bundled_curve("37a1").spec


@pytest.fixture(scope="session")
def c58():
    return bundled_curve("58a1").spec


@pytest.fixture(scope="session")
def rank4():
    return bundled_curve("234446.a1").spec


@pytest.fixture(scope="session")
def c389():
    # rank 2, w = +1; not bundled, used for cheap polygon tests
    return CurveSpec((0, 1, 1, -2, 0), 389, 1, (BadPrime(389, ReductionType.SPLIT),), "389a1")


@pytest.fixture
def acceptance():
    return record
