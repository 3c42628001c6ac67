"""Frequencies, angle tables, cos/sin layouts and position grids."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from services.errors import InvalidDimensionError, ModeMismatchError, ShapeMismatchError
from services.tensor_core import (
    AngleTable,
    FreqSpec,
    PairingMode,
    Precision,
    angle_table_1d,
    angle_table_nd,
    balanced_grid,
    build_tables,
    check_dims,
    expand_cos_sin,
    frequencies,
    grid_positions,
    positions_1d,
)


class TestFrequencies:
    def test_small_widths(self) -> None:
        assert_allclose(frequencies(4, 10000.0), [1.0, 0.01])
        assert_allclose(frequencies(2, 10000.0), [1.0])

    def test_full_width_strictly_decreasing(self) -> None:
        freqs = frequencies(128)
        assert freqs.shape == (64,)
        assert freqs[0] == 1.0
        assert np.all(np.diff(freqs) < 0)

    @pytest.mark.parametrize("d", [0, -2, 3, 7])
    def test_bad_width(self, d) -> None:
        with pytest.raises(InvalidDimensionError):
            frequencies(d)

    def test_bad_base(self) -> None:
        with pytest.raises(InvalidDimensionError):
            frequencies(4, 0.0)

    @pytest.mark.parametrize("d, base", [(8, 10.0), (16, 100.0), (44, 10000.0)])
    def test_scale_consistency(self, d, base) -> None:
        i = np.arange(d // 2)
        assert_allclose(frequencies(d, base) ** d, base ** (-2.0 * i), rtol=1e-12)

    def test_scale_consistency_full_width(self) -> None:
        # 10000 ** -126 underflows, so compare exponents
        i = np.arange(64)
        assert_allclose(128 * np.log(frequencies(128)), -2.0 * i * np.log(10000.0), rtol=1e-12, atol=1e-12)


class TestAngleTables:
    def test_1d_product(self) -> None:
        assert_allclose(angle_table_1d([3], [1.0, 0.01]), [[3.0, 0.03]])

    def test_1d_position_zero(self) -> None:
        assert_array_equal(angle_table_1d([0], frequencies(16)), np.zeros((1, 8)))

    @pytest.mark.parametrize("delta", [1, 7, -3])
    def test_1d_linear_in_position_shift(self, delta) -> None:
        freqs = frequencies(32)
        positions = np.arange(10)
        diff = angle_table_1d(positions + delta, freqs) - angle_table_1d(positions, freqs)
        assert_allclose(diff, np.tile(delta * freqs, (10, 1)), rtol=0, atol=1e-12)

    def test_nd_all_zero(self) -> None:
        theta = angle_table_nd([[0], [0], [0]], FreqSpec((4, 4, 4)))
        assert_array_equal(theta, np.zeros((1, 6)))

    def test_nd_blocks_match_1d_tables(self) -> None:
        t, h, w = grid_positions((4, 5, 6))
        theta = angle_table_nd([t, h, w], FreqSpec((44, 44, 40)))
        assert theta.shape == (120, 64)
        assert_allclose(theta[:, :22], angle_table_1d(t, frequencies(44)))
        assert_allclose(theta[:, 22:44], angle_table_1d(h, frequencies(44)))
        assert_allclose(theta[:, 44:], angle_table_1d(w, frequencies(40)))

    def test_nd_grid_count_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            angle_table_nd([[0, 1], [0, 1]], FreqSpec((4, 4, 4)))

    def test_nd_grid_length_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            angle_table_nd([[0, 1], [0]], FreqSpec((4, 4)))

    def test_freq_spec_rejects_odd_axis(self) -> None:
        with pytest.raises(InvalidDimensionError):
            FreqSpec((44, 43, 41))


class TestExpandCosSin:
    t1, t2 = 0.3, 1.1

    def test_half_layout(self) -> None:
        cos_d, _ = expand_cos_sin([[self.t1, self.t2]], PairingMode.HALF, dtype=np.float64)
        assert_allclose(cos_d, [[np.cos(self.t1), np.cos(self.t2), np.cos(self.t1), np.cos(self.t2)]])

    def test_interleave_layout(self) -> None:
        cos_d, _ = expand_cos_sin([[self.t1, self.t2]], PairingMode.INTERLEAVE, dtype=np.float64)
        assert_allclose(cos_d, [[np.cos(self.t1), np.cos(self.t1), np.cos(self.t2), np.cos(self.t2)]])

    def test_interleave_half_shares_half_layout(self) -> None:
        theta = np.random.default_rng(0).uniform(0, 6, size=(3, 8))
        a = expand_cos_sin(theta, PairingMode.HALF, dtype=np.float64)
        b = expand_cos_sin(theta, PairingMode.INTERLEAVE_HALF, dtype=np.float64)
        assert_array_equal(a[0], b[0])
        assert_array_equal(a[1], b[1])

    def test_quarter_layout_per_half(self) -> None:
        theta = [[0.1, 0.2, 0.3, 0.4]]
        cos_d, _ = expand_cos_sin(theta, PairingMode.QUARTER, dtype=np.float64)
        c = np.cos(theta[0])
        assert_allclose(cos_d[0], [c[0], c[1], c[0], c[1], c[2], c[3], c[2], c[3]])

    @pytest.mark.parametrize("mode", list(PairingMode))
    def test_zero_row(self, mode) -> None:
        cos_d, sin_d = expand_cos_sin(np.zeros((1, 4)), mode)
        assert_array_equal(cos_d, np.ones((1, 8)))
        assert_array_equal(sin_d, np.zeros((1, 8)))

    def test_nd_layout_is_per_block(self) -> None:
        theta = np.arange(1, 7, dtype=np.float64).reshape(1, 6) / 10
        cos_d, _ = expand_cos_sin(theta, PairingMode.HALF, (4, 8))
        c = np.cos(theta[0]).astype(np.float32)
        assert_allclose(cos_d[0], [c[0], c[1], c[0], c[1], c[2], c[3], c[4], c[5], c[2], c[3], c[4], c[5]])

    def test_default_dtype_is_float32(self) -> None:
        cos_d, sin_d = expand_cos_sin(np.zeros((2, 2)), PairingMode.HALF)
        assert cos_d.dtype == np.float32 and sin_d.dtype == np.float32


class TestModesAndDims:
    def test_parse_accepts_underscores(self) -> None:
        assert PairingMode.parse("interleave_half") is PairingMode.INTERLEAVE_HALF
        assert PairingMode.parse(" Quarter ") is PairingMode.QUARTER

    def test_parse_unknown(self) -> None:
        with pytest.raises(ModeMismatchError):
            PairingMode.parse("diagonal")

    def test_quarter_needs_multiple_of_four(self) -> None:
        with pytest.raises(InvalidDimensionError):
            check_dims(PairingMode.QUARTER, (42, 42, 44))
        assert check_dims(PairingMode.QUARTER, [44, 44, 40], 128) == (44, 44, 40)

    def test_dims_must_sum_to_width(self) -> None:
        with pytest.raises(InvalidDimensionError):
            check_dims(PairingMode.HALF, (64, 32), 128)

    def test_precision_dtype(self) -> None:
        assert Precision("32").dtype == np.float32
        assert Precision("64").dtype == np.float64


class TestPositions:
    def test_positions_offset(self) -> None:
        assert_array_equal(positions_1d(3, offset=5), [5, 6, 7])

    def test_grid_first_axis_slowest(self) -> None:
        a, b = grid_positions((2, 3))
        assert_array_equal(a, [0, 0, 0, 1, 1, 1])
        assert_array_equal(b, [0, 1, 2, 0, 1, 2])

    def test_grid_rejects_empty_axis(self) -> None:
        with pytest.raises(ShapeMismatchError):
            grid_positions((4, 0))

    @pytest.mark.parametrize(
        "seq_len, n, expected",
        [(4096, 3, (16, 16, 16)), (28800, 3, (30, 30, 32)), (4096, 2, (64, 64)), (64, 1, (64,)), (7, 2, (1, 7))],
    )
    def test_balanced_grid(self, seq_len, n, expected) -> None:
        assert balanced_grid(seq_len, n) == expected


class TestAngleTable:
    def test_arrays_are_read_only(self) -> None:
        table = AngleTable.build(np.zeros((2, 4)), "half")
        with pytest.raises(ValueError):
            table.cos_d[0, 0] = 2.0
        assert table.width == 8 and table.rows == 2 and table.dims == (8,)

    def test_check_input_shape(self) -> None:
        table = AngleTable.build(np.zeros((2, 4)), "half")
        with pytest.raises(ShapeMismatchError):
            table.check_input(np.zeros((3, 8)))

    def test_check_input_mode(self) -> None:
        table = AngleTable.build(np.zeros((2, 4)), "half")
        with pytest.raises(ModeMismatchError):
            table.check_input(np.zeros((2, 8)), PairingMode.INTERLEAVE)


class TestBuildTables:
    def test_per_axis_tables_slice_full(self) -> None:
        tables = build_tables(64, (44, 44, 40), PairingMode.HALF)
        assert tables.grid == (4, 4, 4)
        assert [t.width for t in tables.per_axis] == [44, 44, 40]
        assert_array_equal(tables.per_axis[1].theta, tables.full.theta[:, 22:44])

    def test_cached(self) -> None:
        a = build_tables(32, (16,), PairingMode.INTERLEAVE)
        b = build_tables(32, (16,), PairingMode.INTERLEAVE)
        assert a is b

    def test_explicit_grid_must_cover_sequence(self) -> None:
        with pytest.raises(ShapeMismatchError):
            build_tables(64, (8, 8), PairingMode.HALF, grid=(4, 8))

    def test_precision_sets_dtype(self) -> None:
        tables = build_tables(8, (8,), PairingMode.HALF, precision=Precision.FP64)
        assert tables.full.dtype == np.float64


LAYOUTS = [(16,), (8, 8), (44, 44, 40)]


@pytest.mark.parametrize("mode", list(PairingMode))
@pytest.mark.parametrize("dims", LAYOUTS, ids=lambda dims: "+".join(map(str, dims)))
class TestExpandedLayoutInvariants:
    def test_unit_circle(self, mode, dims, rng) -> None:
        theta = rng.uniform(-50, 50, size=(5, sum(dims) // 2))
        for dtype, atol in ((np.float32, 1e-6), (np.float64, 1e-12)):
            table = AngleTable.build(theta, mode, dims, dtype=dtype)
            r2 = table.cos_d.astype(np.float64) ** 2 + table.sin_d.astype(np.float64) ** 2
            assert_allclose(r2, 1.0, rtol=0, atol=atol)

    def test_every_angle_appears_twice_per_row(self, mode, dims) -> None:
        half = sum(dims) // 2
        # distinct angles in (0, pi/2) have distinct cosines and sines
        theta = np.tile(np.arange(1, half + 1) * (1.5 / (half + 1)), (3, 1))
        table = AngleTable.build(theta, mode, dims, dtype=np.float64)
        for arr, fn in ((table.cos_d, np.cos), (table.sin_d, np.sin)):
            for row in range(3):
                values, counts = np.unique(arr[row], return_counts=True)
                assert_array_equal(counts, np.full(half, 2))
                assert_allclose(np.sort(values), np.sort(fn(theta[row])), rtol=0, atol=1e-15)
