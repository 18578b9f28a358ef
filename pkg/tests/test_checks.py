import pytest

from thermistor.checks import DEFAULT_SAMPLES, SUITES, run_suite


@pytest.mark.parametrize("name", ["monotonicity", "h1", "interpolation"])
def test_suites_pass_on_small_samples(name):
    results, elapsed = run_suite(name, samples=500, seed=11)
    assert results and elapsed >= 0
    assert all(c.passed for c in results), [c for c in results if not c.passed]


def test_phipsi_flags_only_the_small_lambda_bound():
    results, _ = run_suite("phipsi", samples=5000, seed=11)
    failed = [c.name for c in results if not c.passed]
    assert failed == ["psi-bounds[lambda=0.1]"]


def test_suites_are_seeded():
    a, _ = run_suite("interpolation", samples=50, seed=3)
    b, _ = run_suite("interpolation", samples=50, seed=3)
    assert [c.detail for c in a] == [c.detail for c in b]


def test_registry():
    assert set(SUITES) == set(DEFAULT_SAMPLES) == {"monotonicity", "h1", "interpolation", "phipsi"}
