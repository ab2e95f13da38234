"""Memory-immersed ADC network tests: charge-sharing references, SAR/Flash/
hybrid conversion, MAV statistics, asymmetric search trees, and DNL/INL."""

from fractions import Fraction

import numpy as np
import pytest

from fdcim import (
    AdcConfig,
    AdcMode,
    CapDac,
    ConfigError,
    HybridNetwork,
    MavPmf,
    MemoryAdc,
    ParameterError,
    ShapeError,
    balanced_tree,
    build_asymmetric_tree,
    dac_reference,
    dnl_inl,
    expected_comparisons,
    flash_convert_msbs,
    hybrid_convert,
    hybrid_timeline,
    mav_pmf,
    midcell_sweep,
    sar_convert,
    transfer_curve,
)
from fdcim.adc import SearchLeaf, SearchNode, SearchTree

SAR5 = AdcConfig(bits=5, mode=AdcMode.SAR)


def ideal_code(vin, bits, vdd=1.0):
    return min(max(int(vin / vdd * (1 << bits)), 0), (1 << bits) - 1)


class TestCapDac:
    def test_midscale(self):
        dac = CapDac.ideal(32)
        assert dac_reference(dac, range(16)) == 0.5

    def test_rails(self):
        dac = CapDac.ideal(32)
        assert dac_reference(dac, []) == 0.0
        assert dac_reference(dac, range(32)) == 1.0

    def test_mismatch_matches_charge_sum_oracle(self):
        rng = np.random.default_rng(0)
        mm = rng.normal(0, 0.02, 32)
        mm[0] = 0.01
        dac = CapDac(32, mm, vdd=1.2)
        subset = [0, 3, 17]
        expect = 1.2 * sum(1 + mm[i] for i in subset) / sum(1 + mm[i] for i in range(32))
        assert dac_reference(dac, subset) == pytest.approx(expect, abs=1e-15)

    def test_too_few_units_rejected(self):
        with pytest.raises(ConfigError):
            CapDac.ideal(1)

    def test_bad_subset_rejected(self):
        with pytest.raises(ParameterError):
            dac_reference(CapDac.ideal(8), [8])


class TestSarConvert:
    def test_rail_codes(self):
        dac = CapDac.ideal(32)
        assert sar_convert(0.0, dac, SAR5).code == 0
        assert sar_convert(1.0 - 1e-9, dac, SAR5).code == 31

    def test_matches_ideal_quantizer(self):
        """Ideal SAR equals the floor staircase at non-boundary inputs."""
        dac = CapDac.ideal(32)
        for bits in (3, 4, 5):
            cfg = AdcConfig(bits=bits, mode=AdcMode.SAR)
            sweep = (np.arange(2000) + 0.37) / 2000
            for v in sweep:
                assert sar_convert(float(v), dac, cfg).code == ideal_code(v, bits)

    def test_five_comparisons_per_conversion(self):
        dac = CapDac.ideal(32)
        for v in (0.1, 0.5, 0.93):
            trace = sar_convert(v, dac, SAR5)
            assert trace.comparisons == 5 == len(trace.cycles)

    def test_first_reference_is_midscale(self):
        trace = sar_convert(0.3, CapDac.ideal(32), SAR5)
        assert trace.cycles[0].references == (0.5,)

    def test_saturation_recorded(self):
        dac = CapDac.ideal(32)
        low = sar_convert(-0.2, dac, SAR5)
        high = sar_convert(1.4, dac, SAR5)
        assert low.code == 0 and low.saturated
        assert high.code == 31 and high.saturated
        assert not sar_convert(0.4, dac, SAR5).saturated

    def test_wrong_mode_rejected(self):
        with pytest.raises(ConfigError):
            sar_convert(0.5, CapDac.ideal(32),
                        AdcConfig(bits=5, mode=AdcMode.FLASH))


class TestFlashConvert:
    def test_three_arrays_for_two_bits(self):
        dacs = tuple(CapDac.ideal(32) for _ in range(3))
        res = flash_convert_msbs(0.6, dacs, 2)
        assert res.msbs == 2  # binary 10: code range [16, 24) of 32
        assert res.cycle.comparators == 3
        assert res.cycle.references == (0.25, 0.5, 0.75)

    def test_bottom_quartile(self):
        dacs = tuple(CapDac.ideal(32) for _ in range(3))
        assert flash_convert_msbs(0.249, dacs, 2).msbs == 0

    def test_wrong_dac_count_rejected(self):
        with pytest.raises(ConfigError):
            flash_convert_msbs(0.5, (CapDac.ideal(32),) * 2, 2)

    def test_full_flash_is_single_cycle(self):
        adc = MemoryAdc(CapDac.ideal(32), AdcConfig(bits=5, mode=AdcMode.FLASH))
        sweep = midcell_sweep(256)
        for v in sweep:
            trace = adc.convert(float(v))
            assert trace.comparisons == 1
            assert trace.comparator_ops == 31
            assert trace.code == ideal_code(v, 5)


class TestHybridConvert:
    CFG = AdcConfig(bits=5, mode=AdcMode.HYBRID, flash_bits=2)

    def test_cycle_count_four_vs_sar_five(self):
        net = HybridNetwork.ideal(32, 3)
        trace = hybrid_convert(0.6, net, self.CFG)
        assert trace.comparisons == 4
        assert sar_convert(0.6, CapDac.ideal(32), SAR5).comparisons == 5
        assert trace.cycles[0].mode == "flash"
        assert all(c.mode == "sar" for c in trace.cycles[1:])

    def test_equals_sar_in_every_bin(self):
        """Exhaustive per-bin equivalence for ideal components."""
        net = HybridNetwork.ideal(32, 3)
        dac = CapDac.ideal(32)
        for code in range(32):
            for frac in (0.15, 0.5, 0.85):
                v = (code + frac) / 32
                h = hybrid_convert(v, net, self.CFG)
                s = sar_convert(v, dac, SAR5)
                assert h.code == s.code == code

    def test_timeline_schedule(self):
        net = HybridNetwork.ideal(32, 3)
        entries = hybrid_timeline(net, self.CFG)
        cycle1 = {e.array: e.state for e in entries if e.cycle == 1}
        assert cycle1 == {"A1": "compare", "A2": "flash-ref",
                          "A3": "flash-ref", "A4": "flash-ref"}
        for cycle in (2, 3, 4):
            states = {e.array: e.state for e in entries if e.cycle == cycle}
            assert states == {"A1": "compare", "A2": "sar-dac",
                              "A3": "free", "A4": "free"}
        assert max(e.cycle for e in entries) == 4

    def test_flash_bits_must_be_below_bits(self):
        with pytest.raises(ConfigError):
            AdcConfig(bits=5, mode=AdcMode.HYBRID, flash_bits=5)


class TestMavPmf:
    def test_single_column_two_point(self):
        pmf = mav_pmf(1, 1)
        assert pmf.probabilities == (Fraction(3, 4), Fraction(1, 4))

    def test_normalized(self):
        for n in (8, 16, 32, 64):
            assert sum(mav_pmf(n, 5).probabilities) == 1

    def test_skewed_mode_below_midscale(self):
        pmf = mav_pmf(32, 5)
        assert int(np.argmax(pmf.as_floats())) < 16

    def test_matches_convolution_oracle(self):
        """Library uses the closed-form binomial; the oracle convolves the
        per-column Bernoulli(1/4) term exactly."""
        for n_cols, bits in ((8, 3), (32, 5), (20, 4)):
            dist = [Fraction(1)]
            for _ in range(n_cols):
                nxt = [Fraction(0)] * (len(dist) + 1)
                for i, p in enumerate(dist):
                    nxt[i] += p * Fraction(3, 4)
                    nxt[i + 1] += p * Fraction(1, 4)
                dist = nxt
            codes = 1 << bits
            expect = [Fraction(0)] * codes
            for count, p in enumerate(dist):
                expect[min(count * codes // n_cols, codes - 1)] += p
            assert mav_pmf(n_cols, bits).probabilities == tuple(expect)

    def test_signed_algebra_normalized(self):
        pmf = mav_pmf(16, 4, algebra="signed")
        assert sum(pmf.probabilities) == 1

    def test_unknown_algebra_rejected(self):
        with pytest.raises(ParameterError):
            mav_pmf(8, 3, algebra="bogus")


def plain_dp_cost(weights):
    """Unaccelerated O(n^3) interval DP, the independent optimum oracle."""
    n = len(weights)
    prefix = [Fraction(0)]
    for w in weights:
        prefix.append(prefix[-1] + w)
    cost = [[Fraction(0)] * n for _ in range(n)]
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length - 1
            best = min(cost[i][s] + cost[s + 1][j] for s in range(i, j))
            cost[i][j] = best + (prefix[j + 1] - prefix[i])
    return cost[0][n - 1]


def enumerate_tree_costs(weights, i, j, depth=0):
    """Expected-depth costs of every alphabetic tree over leaves i..j."""
    if i == j:
        yield weights[i] * depth
        return
    for s in range(i, j):
        for left in enumerate_tree_costs(weights, i, s, depth + 1):
            for right in enumerate_tree_costs(weights, s + 1, j, depth + 1):
                yield left + right


class TestAsymmetricTree:
    def test_uniform_pmf_gets_balanced_depth(self):
        pmf = MavPmf(tuple(Fraction(1, 32) for _ in range(32)))
        tree = build_asymmetric_tree(pmf)
        assert expected_comparisons(tree, pmf) == 5.0

    def test_point_mass_is_shallow(self):
        probs = [Fraction(0)] * 32
        probs[9] = Fraction(1)
        pmf = MavPmf(tuple(probs))
        tree = build_asymmetric_tree(pmf)
        depth = int(tree.depths()[9])
        assert expected_comparisons(tree, pmf) == float(depth)
        assert depth <= 5

    def test_matches_exhaustive_search_small(self):
        """DP optimum equals brute-force enumeration for B <= 3."""
        rng = np.random.default_rng(1)
        for bits in (1, 2, 3):
            n = 1 << bits
            for _ in range(5):
                raw = [Fraction(int(x), 1) for x in rng.integers(0, 20, n)]
                total = sum(raw) or Fraction(1)
                weights = tuple(w / total for w in raw)
                pmf = MavPmf(weights)
                tree = build_asymmetric_tree(pmf)
                dp = sum(p * int(d) for p, d in zip(weights, tree.depths()))
                brute = min(enumerate_tree_costs(weights, 0, n - 1))
                assert dp == brute

    def test_knuth_bounds_match_plain_dp(self):
        """The root-bounded DP equals the unaccelerated DP at full size."""
        pmf = mav_pmf(32, 5)
        tree = build_asymmetric_tree(pmf)
        dp = sum(p * int(d) for p, d in zip(pmf.probabilities, tree.depths()))
        assert dp == plain_dp_cost(pmf.probabilities)

    def test_never_worse_than_balanced(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            raw = [Fraction(int(x) + 1, 1) for x in rng.integers(0, 50, 32)]
            total = sum(raw)
            pmf = MavPmf(tuple(w / total for w in raw))
            opt = expected_comparisons(build_asymmetric_tree(pmf), pmf)
            bal = expected_comparisons(balanced_tree(5), pmf)
            assert opt <= bal

    def test_headline_expected_comparisons(self):
        pmf = mav_pmf(32, 5)
        e = expected_comparisons(build_asymmetric_tree(pmf), pmf)
        assert e < 5.0
        assert abs(e - 3.7) <= 0.5

    def test_size_mismatch_rejected(self):
        pmf = mav_pmf(32, 5)
        with pytest.raises(ShapeError):
            expected_comparisons(balanced_tree(4), pmf)

    def test_leaves_must_be_in_code_order(self):
        with pytest.raises(ShapeError):
            SearchTree(SearchNode(0, SearchLeaf(1), SearchLeaf(0)), 2)


class TestAsymmetricConvert:
    def test_matches_sar_for_ideal_components(self):
        pmf = mav_pmf(32, 5)
        tree = build_asymmetric_tree(pmf)
        adc = MemoryAdc(CapDac.ideal(32),
                        AdcConfig(bits=5, mode=AdcMode.ASYMMETRIC, tree=tree))
        for v in midcell_sweep(320):
            assert adc.convert(float(v)).code == ideal_code(v, 5)

    def test_comparisons_equal_leaf_depth(self):
        tree = balanced_tree(5)
        adc = MemoryAdc(CapDac.ideal(32),
                        AdcConfig(bits=5, mode=AdcMode.ASYMMETRIC, tree=tree))
        trace = adc.convert(0.4)
        assert trace.comparisons == int(tree.depths()[trace.code])


class TestTransferCurveAndDnl:
    def test_ideal_staircase_has_equal_steps(self):
        adc = MemoryAdc(CapDac.ideal(32), SAR5)
        curve = transfer_curve(adc, midcell_sweep(32 * 64))
        counts = np.bincount([c for _, c in curve], minlength=32)
        assert np.all(counts == 64)
        codes = [c for _, c in curve]
        assert np.all(np.diff(codes) >= 0)

    def test_ideal_dnl_inl_zero(self):
        adc = MemoryAdc(CapDac.ideal(32), SAR5)
        res = dnl_inl(transfer_curve(adc, midcell_sweep(32 * 64)), 32)
        assert np.max(np.abs(res.dnl)) == 0.0
        assert np.max(np.abs(res.inl)) == 0.0
        assert res.missing_codes == ()

    def test_single_capacitor_mismatch_bends_a_step(self):
        mm = np.zeros(32)
        mm[0] = 0.05
        adc = MemoryAdc(CapDac(32, mm), SAR5)
        res = dnl_inl(transfer_curve(adc, midcell_sweep(32 * 64)), 32)
        assert np.max(np.abs(res.dnl)) > 0.0

    def test_widened_step_arithmetic(self):
        """A +25% step at one code balanced by -25% elsewhere shows up
        directly in DNL, and INL accumulates between them."""
        step = 16
        counts = {k: step for k in range(32)}
        counts[5] += step // 4
        counts[20] -= step // 4
        curve = [(0.0, k) for k in range(32) for _ in range(counts[k])]
        res = dnl_inl(curve, 32)
        assert res.dnl[5] == pytest.approx(0.25, abs=1e-12)
        assert res.dnl[20] == pytest.approx(-0.25, abs=1e-12)
        inner = np.delete(res.dnl, [5, 20])
        assert np.max(np.abs(inner)) == 0.0
        assert res.inl[10] == pytest.approx(0.25, abs=1e-12)

    def test_inl_is_prefix_sum_of_dnl(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            adc = MemoryAdc(CapDac.with_mismatch(32, 0.03, rng), SAR5)
            res = dnl_inl(transfer_curve(adc, midcell_sweep(32 * 32)), 32)
            assert np.allclose(res.inl, np.cumsum(res.dnl), atol=1e-12)

    def test_missing_codes_reported(self):
        curve = [(0.0, c) for c in (0, 1, 3) for _ in range(8)]
        res = dnl_inl(curve, 4)
        assert res.missing_codes == (2,)
        assert res.dnl[2] == -1.0

    def test_unsorted_sweep_rejected(self):
        adc = MemoryAdc(CapDac.ideal(32), SAR5)
        with pytest.raises(ShapeError):
            transfer_curve(adc, [0.5, 0.2])

    def test_mismatch_curve_deterministic(self):
        def curve():
            rng = np.random.default_rng(42)
            adc = MemoryAdc(CapDac.with_mismatch(32, 0.05, rng), SAR5)
            return transfer_curve(adc, midcell_sweep(512))

        assert curve() == curve()


class TestCommonModeMismatch:
    def test_shared_array_beats_reference_only_perturbation(self):
        """Digitizing a MAV against references generated on the same
        (identically mismatched) capacitor population cancels the distortion
        comparison-by-comparison; perturbing only the reference DAC leaves a
        systematic code error."""
        exact = CapDac.ideal(32)
        ideal_codes = {k: sar_convert(k / 32, exact, SAR5).code for k in range(33)}
        rng = np.random.default_rng(11)
        err_shared = err_ref_only = 0
        for _ in range(60):
            mismatch = rng.normal(0.0, 0.05, 32)
            noisy = CapDac(32, mismatch)
            for k in range(33):
                mav_voltage = dac_reference(noisy, range(k))
                err_shared += abs(sar_convert(mav_voltage, noisy, SAR5).code
                                  - ideal_codes[k])
                err_ref_only += abs(sar_convert(k / 32, noisy, SAR5).code
                                    - ideal_codes[k])
        assert err_shared < err_ref_only
