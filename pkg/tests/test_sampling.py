import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvgsa.sampling import (
    SamplingError,
    initial_doe,
    sobol_unit,
    unit_sample_to_mixed,
    unit_to_mixed,
)
from mvgsa.space import MixedDesignSpace

PI = math.pi


def reference_sobol_1d(n):
    """Independent 1-D Sobol' generator: Gray-code van der Corput in base 2."""
    out = [0.0]
    x = 0  # 32-bit integer state
    for i in range(1, n):
        c = (i - 1)
        k = 0
        while c & 1:
            c >>= 1
            k += 1
        x ^= 1 << (31 - k)
        out.append(x / 2**32)
    return out


class TestSobolUnit:
    def test_first_two_points_2d(self):
        pts = sobol_unit(2, 2).values
        np.testing.assert_array_equal(pts, [[0.0, 0.0], [0.5, 0.5]])

    def test_first_four_points_1d_match_reference(self):
        pts = sobol_unit(1, 4).values.ravel()
        np.testing.assert_array_equal(pts, [0.0, 0.5, 0.75, 0.25])
        np.testing.assert_array_equal(pts, reference_sobol_1d(4))

    def test_first_sixteen_match_reference(self):
        pts = sobol_unit(1, 16).values.ravel()
        np.testing.assert_allclose(pts, reference_sobol_1d(16), atol=1e-15)

    def test_skip(self):
        full = sobol_unit(1, 4).values
        skipped = sobol_unit(1, 2, skip=2).values
        np.testing.assert_array_equal(full[2:], skipped)

    def test_equidistribution_16x16(self):
        # first 256 unscrambled 2-D points put exactly one point per dyadic
        # cell of the 16x16 grid
        pts = sobol_unit(2, 256).values
        cells = np.floor(pts * 16).astype(int)
        counts = np.zeros((16, 16), dtype=int)
        for a, b in cells:
            counts[a, b] += 1
        assert (counts == 1).all()

    def test_scramble_determinism_and_range(self):
        a = sobol_unit(3, 50, scramble_seed=7).values
        b = sobol_unit(3, 50, scramble_seed=7).values
        c = sobol_unit(3, 50, scramble_seed=8).values
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert (a >= 0).all() and (a < 1).all()

    def test_dim_limit(self):
        with pytest.raises(SamplingError, match="direction numbers"):
            sobol_unit(30000, 4)

    def test_supports_21_dims(self):
        assert sobol_unit(21, 4).values.shape == (4, 21)


class TestUnitToMixed:
    def test_left_edge_level(self):
        space = MixedDesignSpace.create(qualitative=[("t", 4)])
        assert unit_to_mixed([0.0], space).qualitative == (1,)

    def test_right_edge_clamped(self):
        space = MixedDesignSpace.create(qualitative=[("t", 4)])
        assert unit_to_mixed([0.999], space).qualitative == (4,)

    def test_quantitative_midpoint(self):
        space = MixedDesignSpace.create([("x", -PI, PI)])
        assert unit_to_mixed([0.5], space).quantitative == (0.0,)

    @given(st.integers(2, 9), st.floats(0.0, 1.0, exclude_max=True))
    @settings(max_examples=200, deadline=None)
    def test_levels_always_in_range(self, l, u):
        space = MixedDesignSpace.create(qualitative=[("t", l)])
        level = unit_to_mixed([u], space).qualitative[0]
        assert 1 <= level <= l

    def test_level_frequencies_uniform(self):
        n = 100_000
        space = MixedDesignSpace.create(qualitative=[("t", 7)])
        sample = unit_sample_to_mixed(sobol_unit(1, n, scramble_seed=3), space)
        p = 1.0 / 7.0
        bound = 3.0 * math.sqrt(p * (1 - p) / n)
        for level in range(1, 8):
            freq = np.mean(sample.xt[:, 0] == level)
            assert abs(freq - p) < bound


class TestInitialDoe:
    def test_largest_variable_fully_covered(self):
        space = MixedDesignSpace.create(
            qualitative=[("a", 4), ("b", 7), ("c", 41), ("d", 42)])
        doe = initial_doe(space, 42, seed=5)
        counts = np.bincount([p.qualitative[3] for p in doe], minlength=43)[1:]
        assert (counts == 1).all()

    def test_balanced_levels(self):
        space = MixedDesignSpace.create(qualitative=[("t", 3)])
        with pytest.raises(SamplingError):
            # qualitative-only space cannot produce more points than designs
            initial_doe(space, 6, seed=0)
        space2 = MixedDesignSpace.create([("x", 0, 1)], [("t", 3)])
        doe = initial_doe(space2, 6, seed=0)
        counts = np.bincount([p.qualitative[0] for p in doe], minlength=4)[1:]
        assert (counts == 2).all()

    def test_lhs_stratification(self):
        space = MixedDesignSpace.create([("x", 0.0, 1.0), ("y", -2.0, 3.0)])
        doe = initial_doe(space, 5, seed=9)
        for j, (lo, hi) in enumerate([(0.0, 1.0), (-2.0, 3.0)]):
            vals = sorted((p.quantitative[j] - lo) / (hi - lo) for p in doe)
            strata = [int(v * 5) for v in vals]
            assert strata == [0, 1, 2, 3, 4]

    def test_no_duplicates_all_qualitative(self):
        space = MixedDesignSpace.create(qualitative=[("a", 3), ("b", 4)])
        doe = initial_doe(space, 12, seed=2)
        assert len(set(doe)) == 12

    def test_determinism(self):
        space = MixedDesignSpace.create([("x", 0, 1)], [("t", 5)])
        a = initial_doe(space, 10, seed=123)
        b = initial_doe(space, 10, seed=123)
        assert a == b
        assert a != initial_doe(space, 10, seed=124)

    def test_minimum_size_enforced(self):
        space = MixedDesignSpace.create(qualitative=[("t", 8)])
        with pytest.raises(SamplingError, match="largest"):
            initial_doe(space, 4, seed=0)

    @given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 50))
    @settings(max_examples=50, deadline=None)
    def test_counts_differ_by_at_most_one(self, la, lb, seed):
        space = MixedDesignSpace.create([("x", 0, 1)], [("a", la), ("b", lb)])
        n = max(la, lb) + 3
        doe = initial_doe(space, n, seed=seed)
        for j, l in enumerate((la, lb)):
            counts = np.bincount([p.qualitative[j] for p in doe], minlength=l + 1)[1:]
            assert counts.max() - counts.min() <= 1
