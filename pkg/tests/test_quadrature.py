import math

import numpy as np
import pytest

from fracou.errors import ConfigurationError, QuadratureError, UsageError
from fracou.schemas import QuadratureConfig, QuadResult, TruncationPolicy
from fracou.utils.grids import next_power_of_two, parse_float_list, parse_pairs, parse_range, refine_times
from fracou.utils.quadrature import (
    SingularKernel,
    check_tolerance,
    kernel_integral,
    rectangle_integral,
    resolve_lower_cutoff,
    symmetric_kernel_integral,
)
from fracou.utils.rng import map_chunks, path_generator, standard_normals, substream

POWER_KERNEL = SingularKernel(lambda _x: 1.0, 0.75)


def test_singular_kernel_evaluates_power():
    assert POWER_KERNEL(4.0) == pytest.approx(0.5)
    assert POWER_KERNEL(-4.0) == pytest.approx(0.5)
    assert POWER_KERNEL.power == pytest.approx(0.5)


def test_kernel_integral_through_the_singularity(quad):
    assert kernel_integral(POWER_KERNEL, 0.0, 1.0, quad).value == pytest.approx(2.0, rel=1e-8)
    assert kernel_integral(POWER_KERNEL, 0.25, 4.0, quad).value == pytest.approx(3.0, rel=1e-8)


def test_kernel_integral_with_weight(quad):
    result = kernel_integral(POWER_KERNEL, 0.0, 2.0, quad, lambda x: x)
    assert result.value == pytest.approx(2.0 / 3.0 * 2.0**1.5, rel=1e-8)


def test_kernel_integral_substitutes_with_configured_exponent(quad, monkeypatch):
    exponents = []
    original = QuadratureConfig.singularity_substitution_exponent

    def recording(hurst: float) -> float:
        exponents.append(hurst)
        return original(hurst)

    monkeypatch.setattr(QuadratureConfig, "singularity_substitution_exponent", staticmethod(recording))
    assert kernel_integral(POWER_KERNEL, 0.0, 1.0, quad).value == pytest.approx(2.0, rel=1e-8)
    assert exponents == [0.75]
    assert original(0.75) * POWER_KERNEL.power == pytest.approx(1.0)

def test_empty_interval_is_zero(quad):
    assert kernel_integral(POWER_KERNEL, 1.0, 1.0, quad) == QuadResult(0.0, 0.0)


def test_symmetric_kernel_integral_splits_at_zero(quad):
    assert symmetric_kernel_integral(POWER_KERNEL, -1.0, 1.0, quad).value == pytest.approx(4.0, rel=1e-8)
    assert symmetric_kernel_integral(POWER_KERNEL, -4.0, -0.25, quad).value == pytest.approx(3.0, rel=1e-8)


@pytest.mark.parametrize("hurst", [0.6, 0.75, 0.9])
def test_rectangle_integral_of_power_kernel(hurst, quad):
    kernel = SingularKernel(lambda _x: 1.0, hurst)
    power = 2.0 * hurst - 2.0
    expected = 2.0 / ((power + 1.0) * (power + 2.0))
    result = rectangle_integral(kernel, (0.0, 1.0), (0.0, 1.0), quad)
    assert result.value == pytest.approx(expected, rel=1e-7)
    assert result.error < 1e-6


def test_rectangle_error_stays_within_tolerance_on_long_ranges(quad):
    kernel = SingularKernel(lambda _x: 1.0, 0.75)
    result = rectangle_integral(kernel, (-20.0, 20.0), (-20.0, 5.0), quad, lambda u, v: math.exp(u - 20.0 + v - 5.0))
    assert result.value > 0.0
    assert 0.0 < result.error <= quad.tolerance_for(result.value)


def test_check_tolerance_raises_with_estimate():
    quad = QuadratureConfig(rel_tol=1e-8, abs_tol=1e-10)
    with pytest.raises(QuadratureError) as excinfo:
        check_tolerance(QuadResult(1.0, 1e-3), quad, "test")
    assert excinfo.value.estimate == 1.0
    assert excinfo.value.error == 1e-3
    assert check_tolerance(QuadResult(1.0, 1e-9), quad, "test").value == 1.0


def test_resolve_lower_cutoff_derives_from_tolerance():
    cutoff, bound = resolve_lower_cutoff(TruncationPolicy(tolerance=1e-8), anchor=0.0, rate=1.0, scale=1.0)
    assert cutoff == pytest.approx(math.log(1e-8))
    assert bound == pytest.approx(1e-8)


def test_resolve_lower_cutoff_checks_explicit_cutoff():
    with pytest.raises(ConfigurationError):
        resolve_lower_cutoff(TruncationPolicy(tolerance=1e-8, lower_cutoff=-5.0), anchor=0.0, rate=1.0, scale=1.0)
    with pytest.raises(ConfigurationError):
        resolve_lower_cutoff(TruncationPolicy(tolerance=1e-8, lower_cutoff=-5.0), anchor=-10.0, rate=1.0, scale=1.0)
    cutoff, bound = resolve_lower_cutoff(
        TruncationPolicy(tolerance=1e-8, lower_cutoff=-30.0), anchor=0.0, rate=1.0, scale=1.0
    )
    assert cutoff == -30.0
    assert bound < 1e-8


def test_resolve_lower_cutoff_rejects_unrepresentable_tolerance():
    with pytest.raises(ConfigurationError):
        resolve_lower_cutoff(TruncationPolicy(tolerance=1e-310), anchor=0.0, rate=1.0, scale=1.0)


def test_path_streams_are_reproducible_and_distinct():
    first = path_generator(3, 0).standard_normal(4)
    assert np.array_equal(first, path_generator(3, 0).standard_normal(4))
    assert not np.array_equal(first, path_generator(3, 1).standard_normal(4))
    assert not np.array_equal(first, path_generator(3, 0, substream(0, 1)).standard_normal(4))
    assert substream((0, 1), 2) == (0, 1, 2)


def test_standard_normals_depend_only_on_path_index():
    whole = standard_normals(9, 0, 5, 3)
    assert np.array_equal(whole[2:], standard_normals(9, 2, 5, 3))


def test_map_chunks_keeps_path_order():
    build = lambda start, stop: np.arange(start, stop, dtype=float)[:, None]  # noqa: E731
    serial = map_chunks(build, 10, 3)
    threaded = map_chunks(build, 10, 3, workers=3)
    assert serial.ravel().tolist() == list(range(10))
    assert np.array_equal(serial, threaded)


def test_parse_range_is_inclusive():
    assert parse_range("0:1:0.25") == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert parse_range("0:20:0.1").size == 201
    for text in ("0:1", "1:0:0.1", "0:1:0", "a:b:c"):
        with pytest.raises(UsageError):
            parse_range(text)


def test_parse_lists_and_pairs():
    assert parse_float_list("4,16,64,256") == [4.0, 16.0, 64.0, 256.0]
    assert parse_pairs("1:2,0.5:3") == [(1.0, 2.0), (0.5, 3.0)]
    with pytest.raises(UsageError):
        parse_pairs("1:2:3")
    with pytest.raises(UsageError):
        parse_float_list(",")


def test_refine_times_keeps_original_points():
    fine, index = refine_times(np.array([0.0, 1.0, 3.0]), 2)
    assert fine == pytest.approx([0.0, 0.5, 1.0, 2.0, 3.0])
    assert index.tolist() == [0, 2, 4]


def test_next_power_of_two():
    assert [next_power_of_two(n) for n in (1, 2, 5, 8, 9)] == [1, 2, 8, 8, 16]
