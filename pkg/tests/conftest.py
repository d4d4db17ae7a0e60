import pytest

from superevent.synthetic import write_benchmark_fixture


@pytest.fixture(scope="session")
def bench_fixture(tmp_path_factory):
    """Synthetic pose-benchmark inputs shared by CLI and acceptance tests."""
    out = tmp_path_factory.mktemp("benchfix")
    return write_benchmark_fixture(out, seed=7, rate_hz=6.0, duration_s=2.6)
