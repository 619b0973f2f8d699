import pytest

from qdss import seed


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): exit-criterion test; prints one PASS/FAIL line")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {marker.args[0]}: {verdict}", flush=True)


@pytest.fixture(scope="session")
def catalog_wh():
    """Warehouse with the three historical quakes and full dimension tables."""
    return seed.build_catalog_warehouse(synthetic=0)


@pytest.fixture(scope="session")
def corpus_wh():
    """Catalog plus 500 deterministic synthetic quakes."""
    return seed.build_catalog_warehouse(synthetic=500, seed=7)


@pytest.fixture(scope="session")
def small_corpus_wh():
    """Catalog plus 50 synthetic quakes, for cheaper module tests."""
    return seed.build_catalog_warehouse(synthetic=50, seed=7)


@pytest.fixture()
def demo_root(tmp_path):
    """Fresh on-disk data directory: catalog quakes (tolls trimmed), synthetic
    history, feeds, capacities, standards and gateway config."""
    return seed.write_demo_data(tmp_path / "data", synthetic=30, seed=11,
                                catalog_casualties=False)
