"""Crossbar behavioral model tests: programming, multiply-average rows,
comparator readout, the bitplane transform, early termination, and chained
layers."""

import numpy as np
import pytest

from fdcim import (
    CrossbarProgrammingError,
    ShapeError,
    Signedness,
    TerminationMode,
    bitplane_transform,
    chain_layer,
    comparator,
    mav,
    program,
    quantize,
    to_bitplanes,
    walsh,
)


def random_tensor(rng, n_cols, bits=4):
    x = rng.uniform(-1.0, 1.0, n_cols)
    return to_bitplanes(quantize(x, bits, (-1.0, 1.0)))


def zero_rule(full_result, threshold):
    """The termination oracle: zero every row whose full output lands inside
    the dead zone, leave the rest untouched."""
    vals = full_result.output.values
    mags = np.abs(vals * float(full_result.output.scale))
    return np.where(mags <= threshold, 0, vals)


class TestProgramming:
    def test_walsh_array(self):
        arr = program(walsh(2).rows)
        assert arr.rows == arr.cols == 4
        assert np.all(np.abs(arr.weights) == 1)

    def test_zero_entry_rejected(self):
        bad = walsh(2).rows.copy()
        bad[1, 1] = 0
        with pytest.raises(CrossbarProgrammingError):
            program(bad)

    def test_replay_is_bit_identical(self):
        rng = np.random.default_rng(0)
        tensors = [random_tensor(rng, 8) for _ in range(10)]

        def run():
            arr = program(walsh(3).rows, mav_noise_sigma=0.05, rng_seed=99)
            return [bitplane_transform(arr, t, TerminationMode.SOUND, 0.4)
                    for t in tensors]

        first, second = run(), run()
        for a, b in zip(first, second):
            assert np.array_equal(a.output.values, b.output.values)
            assert np.array_equal(a.planes_processed, b.planes_processed)


class TestMav:
    def test_all_zero_plane(self):
        arr = program(walsh(3).rows)
        assert not mav(arr, np.zeros(8, dtype=np.uint8)).any()

    def test_half_matching_row(self):
        arr = program(np.array([[1, 1, -1, -1]]))
        assert mav(arr, [1, 1, 0, 0]).tolist() == [0.5]

    def test_all_ones_against_first_walsh_row(self):
        arr = program(walsh(4).rows)
        out = mav(arr, np.ones(16, dtype=np.uint8))
        assert out[0] == 1.0

    def test_bounded(self):
        rng = np.random.default_rng(1)
        arr = program(walsh(5).rows)
        for _ in range(100):
            plane = rng.integers(0, 2, 32)
            assert np.max(np.abs(mav(arr, plane))) <= 1.0

    def test_length_mismatch(self):
        arr = program(walsh(3).rows)
        with pytest.raises(ShapeError):
            mav(arr, np.zeros(7, dtype=np.uint8))


class TestComparator:
    def test_positive(self):
        assert comparator([0.5], [0.0]).tolist() == [1]

    def test_tie_resolves_low(self):
        assert comparator([0.0], [0.0]).tolist() == [0]

    def test_offset_flips_decision(self):
        assert comparator([-0.01], [0.02]).tolist() == [1]


class TestBitplaneTransform:
    def test_single_plane_gives_sign_pattern(self):
        """With one input plane and no noise the digits are the exact sign
        pattern of W x (ties to -1 by the comparator rule)."""
        rng = np.random.default_rng(2)
        matrix = walsh(3).rows
        arr = program(matrix)
        for _ in range(50):
            bits = rng.integers(0, 2, 8)
            x = quantize(bits.astype(float), 1, (0.0, 1.0), Signedness.UNSIGNED)
            res = bitplane_transform(arr, to_bitplanes(x))
            expected = np.where(matrix @ bits > 0, 1, -1)
            assert np.array_equal(res.output.values, expected)

    def test_sound_stops_immediately_when_threshold_dominates(self):
        rng = np.random.default_rng(3)
        arr = program(walsh(3).rows)
        t = random_tensor(rng, 8, bits=4)
        total = float(t.scale) * (2**4 - 1)
        res = bitplane_transform(arr, t, TerminationMode.SOUND, total + 0.01)
        assert np.all(res.planes_processed == 1)
        assert not res.output.values.any()
        assert np.all(res.terminated_early)
        assert res.cycle_count == 2

    def test_sound_equals_zero_rule_of_full(self):
        rng = np.random.default_rng(4)
        matrix = walsh(3).rows
        for _ in range(2000):
            t = random_tensor(rng, 8, bits=4)
            threshold = rng.uniform(0.0, 2.0)
            full = bitplane_transform(program(matrix), t, TerminationMode.FULL,
                                      threshold)
            sound = bitplane_transform(program(matrix), t, TerminationMode.SOUND,
                                       threshold)
            assert np.array_equal(sound.output.values, zero_rule(full, threshold))

    def test_heuristic_agreement_is_measured_not_asserted(self):
        rng = np.random.default_rng(5)
        matrix = walsh(4).rows
        agree = total = 0
        for _ in range(300):
            t = random_tensor(rng, 16, bits=4)
            sound = bitplane_transform(program(matrix), t,
                                       TerminationMode.SOUND, 0.3)
            heur = bitplane_transform(program(matrix), t,
                                      TerminationMode.HEURISTIC, 0.3)
            agree += int(np.count_nonzero(
                heur.output.values == sound.output.values))
            total += 16
        rate = agree / total
        print(f"heuristic/sound agreement rate: {rate:.4f}")
        assert 0.0 <= rate <= 1.0

    def test_workload_monotone_in_threshold(self):
        rng = np.random.default_rng(6)
        matrix = walsh(4).rows
        tensors = [random_tensor(rng, 16, bits=5) for _ in range(50)]
        prev = None
        for threshold in (0.0, 0.2, 0.5, 1.0, 2.0, 4.0):
            arr = program(matrix, rng_seed=1)
            planes = sum(
                int(bitplane_transform(arr, t, TerminationMode.SOUND,
                                       threshold).planes_processed.sum())
                for t in tensors)
            if prev is not None:
                assert planes <= prev
            prev = planes

    def test_cycle_count_is_twice_max_planes(self):
        rng = np.random.default_rng(7)
        arr = program(walsh(3).rows)
        t = random_tensor(rng, 8, bits=4)
        res = bitplane_transform(arr, t, TerminationMode.SOUND, 0.5)
        assert res.cycle_count == 2 * int(res.planes_processed.max())
        assert res.comparator_ops == int(res.planes_processed.sum())

    def test_noise_respects_mode_alignment(self):
        """Sound termination equals the zero rule even with noise on, as long
        as both runs consume the same invocation stream."""
        rng = np.random.default_rng(8)
        matrix = walsh(3).rows
        for _ in range(200):
            t = random_tensor(rng, 8, bits=4)
            threshold = rng.uniform(0.0, 1.5)
            full = bitplane_transform(
                program(matrix, mav_noise_sigma=0.08, rng_seed=17), t,
                TerminationMode.FULL, threshold)
            sound = bitplane_transform(
                program(matrix, mav_noise_sigma=0.08, rng_seed=17), t,
                TerminationMode.SOUND, threshold)
            assert np.array_equal(sound.output.values, zero_rule(full, threshold))

    def test_length_mismatch(self):
        rng = np.random.default_rng(9)
        arr = program(walsh(3).rows)
        with pytest.raises(ShapeError):
            bitplane_transform(arr, random_tensor(rng, 16))


class TestChainLayer:
    def test_zero_threshold_equals_composition(self):
        matrix = walsh(3).rows
        x = quantize(np.eye(8)[0], 1, (0.0, 1.0), Signedness.UNSIGNED)
        oracle_arr = program(matrix)
        first = bitplane_transform(oracle_arr, to_bitplanes(x))
        second = bitplane_transform(oracle_arr, to_bitplanes(first.output))
        chained = chain_layer(program(matrix), x, 0.0)
        assert np.array_equal(chained.values, second.output.values)
        assert chained.scale == second.output.scale

    def test_huge_threshold_annihilates(self):
        matrix = walsh(3).rows
        x = quantize(np.eye(8)[0], 1, (0.0, 1.0), Signedness.UNSIGNED)
        out = chain_layer(program(matrix), x, 1e9)
        assert not out.values.any()

    def test_deterministic_under_fixed_seed(self):
        rng = np.random.default_rng(10)
        matrix = walsh(4).rows
        x = quantize(rng.uniform(-1, 1, 16), 4, (-1.0, 1.0))

        def run():
            arr = program(matrix, mav_noise_sigma=0.03, rng_seed=21)
            return chain_layer(arr, x, 0.2)

        assert np.array_equal(run().values, run().values)
