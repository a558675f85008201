"""Tests for grid planning: spacings, burst sizing, efficiency, RE maps."""

import math

import numpy as np
import pytest

from bisac.constants import SPEED_OF_LIGHT
from bisac.planner import (
    RE_FILLER,
    RE_REGULAR,
    RE_SENSING,
    FramePlan,
    Numerology,
    PlannerError,
    SensingRequirements,
    build_re_map,
    check_burst_fits,
    compute_burst,
    compute_spacings,
    derive_plan,
    plan_summary,
    spectral_efficiency,
)


def fr2_numerology(n=792, m=560):
    return Numerology(n_subcarriers=n, n_symbols=m, delta_f=120e3, f_c=27.4e9)


def req(r_max=312.5, f_d_max=15e3, delta_r=1.578, delta_fd=214.3):
    return SensingRequirements(
        r_max_req=r_max, f_d_max_req=f_d_max, delta_r_req=delta_r, delta_fd_req=delta_fd
    )


class TestNumerology:
    def test_default_symbol_duration_is_inverse_spacing(self):
        num = fr2_numerology()
        assert num.t0 == pytest.approx(1 / 120e3)

    def test_cp_fraction_extends_duration(self):
        num = Numerology(
            n_subcarriers=8, n_symbols=8, delta_f=120e3, f_c=27.4e9, cp_fraction=0.07
        )
        assert num.t0 == pytest.approx(1.07 / 120e3)

    def test_rejects_too_short_duration(self):
        with pytest.raises(ValueError):
            Numerology(n_subcarriers=8, n_symbols=8, delta_f=120e3, f_c=27.4e9, t0=1e-6)

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            Numerology(n_subcarriers=0, n_symbols=8, delta_f=120e3, f_c=27.4e9)


class TestComputeSpacings:
    def test_unambiguous_range_example(self):
        # ceil(c / (2 * 120 kHz * 312.5 m)) = ceil(3.996...) = 4
        k_f, _ = compute_spacings(fr2_numerology(), req(r_max=312.5))
        assert k_f == 4

    def test_full_grid_capability_gives_spacing_one(self):
        r_full = SPEED_OF_LIGHT / (2 * 120e3)
        k_f, _ = compute_spacings(fr2_numerology(), req(r_max=r_full))
        assert k_f == 1

    def test_doppler_spacing_example(self):
        # 1 / (2 * (1/120 kHz) * 15 kHz) = 4.0 exactly
        _, k_t = compute_spacings(fr2_numerology(), req(f_d_max=15e3))
        assert k_t == 4

    def test_infeasible_requirement_raises(self):
        num = fr2_numerology(n=4, m=4)
        with pytest.raises(PlannerError, match="infeasible"):
            compute_spacings(num, req(r_max=1e-3))

    def test_very_loose_requirement_clamps_to_one(self):
        k_f, k_t = compute_spacings(fr2_numerology(), req(r_max=1e12, f_d_max=1e12))
        assert k_f == 1 and k_t == 1

    def test_monotone_in_range_requirement(self):
        # tightening the unambiguous-range requirement never increases K_F
        num = fr2_numerology()
        r_values = np.linspace(100.0, 5000.0, 60)
        spacings = [compute_spacings(num, req(r_max=r))[0] for r in r_values]
        assert all(a >= b for a, b in zip(spacings, spacings[1:]))

    def test_monotone_in_doppler_requirement(self):
        num = fr2_numerology()
        f_values = np.linspace(1e3, 60e3, 60)
        spacings = [compute_spacings(num, req(f_d_max=f))[1] for f in f_values]
        assert all(a >= b for a, b in zip(spacings, spacings[1:]))

    def test_ceiling_round_trip_slack(self):
        # the supported range after ceiling trails the requirement by at most
        # one spacing step, and the unclamped real-valued spacing meets it
        num = fr2_numerology()
        rng = np.random.default_rng(7)
        for r_req in rng.uniform(50.0, 5000.0, size=40):
            k_f, _ = compute_spacings(num, req(r_max=r_req))
            supported = SPEED_OF_LIGHT / (2 * k_f * num.delta_f)
            assert supported >= r_req * (k_f - 1) / k_f - 1e-9
            unclamped = SPEED_OF_LIGHT / (2 * num.delta_f * r_req)
            assert SPEED_OF_LIGHT / (2 * unclamped * num.delta_f) >= r_req * (1 - 1e-12)


class TestComputeBurst:
    def test_bandwidth_example(self):
        bandwidth, _ = compute_burst(req(delta_r=1.578))
        assert bandwidth == pytest.approx(95e6, rel=1e-3)

    def test_identity_scaling(self):
        bandwidth, _ = compute_burst(req(delta_r=SPEED_OF_LIGHT / 2))
        assert bandwidth == pytest.approx(1.0)

    def test_duration_example(self):
        _, duration = compute_burst(req(delta_fd=214.3))
        assert duration == pytest.approx(4.667e-3, rel=1e-3)
        # matches the frame duration M * T0 for M=560
        assert duration == pytest.approx(560 / 120e3, rel=1e-3)

    def test_burst_exceeding_frame_raises(self):
        num = fr2_numerology()
        with pytest.raises(PlannerError, match="bandwidth"):
            check_burst_fits(num, req(delta_r=0.5))
        with pytest.raises(PlannerError, match="duration"):
            check_burst_fits(num, req(delta_fd=1.0))

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            req(delta_r=-1.0)


class TestSpectralEfficiency:
    def test_table_values_exact(self):
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4)
        assert spectral_efficiency(plan) == 1.9375

    def test_comm_centric_exact(self):
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4, mode="comm_centric")
        assert spectral_efficiency(plan) == 2.0

    def test_degenerate_all_sensing_grid(self):
        num = fr2_numerology(n=24, m=16)
        plan = FramePlan(numerology=num, k_f=1, k_t=1, q_s=4, q_r=4, code_rate=0.75)
        assert spectral_efficiency(plan) == pytest.approx(0.75 * 4)

    def test_pilots_only_drops_sensing_term(self):
        num = fr2_numerology()
        plan = FramePlan(numerology=num, k_f=4, k_t=4, mode="pilots_only")
        n_total = 792 * 560
        n_s = math.ceil(792 / 4) * math.ceil(560 / 4)
        expected = 0.5 * (n_total - n_s) * 4 / n_total
        assert spectral_efficiency(plan) == pytest.approx(expected)

    def test_mode_ordering_property(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(8, 120))
            m = int(rng.integers(8, 120))
            num = fr2_numerology(n=n, m=m)
            k_f = int(rng.integers(1, n + 1))
            k_t = int(rng.integers(1, m + 1))
            q_s = int(rng.choice([2, 4]))
            base = dict(numerology=num, k_f=k_f, k_t=k_t, q_s=q_s, q_r=4)
            eta = {
                mode: spectral_efficiency(FramePlan(mode=mode, **base))
                for mode in ("hybrid", "comm_centric", "pilots_only")
            }
            assert eta["hybrid"] <= eta["comm_centric"] + 1e-12
            if q_s == 4:
                assert eta["hybrid"] == pytest.approx(eta["comm_centric"])
            assert eta["pilots_only"] < eta["hybrid"]


class TestREMap:
    def test_prb_geometry(self):
        num = fr2_numerology(n=12, m=14)
        plan = FramePlan(numerology=num, k_f=4, k_t=4)
        re_map = build_re_map(plan)
        assert re_map.n_sensing == 12
        rows, cols = re_map.sensing_idx
        assert set(rows.tolist()) == {0, 4, 8}
        assert set(cols.tolist()) == {0, 4, 8, 12}
        # first sensing RE in scan order sits at the grid corner
        assert (rows[0], cols[0]) == (0, 0)

    def test_full_scale_count_matches_ceiling_formula(self):
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4)
        re_map = build_re_map(plan)
        assert re_map.n_sensing == 198 * 140 == 27720

    def test_all_sensing_when_spacing_one(self):
        num = fr2_numerology(n=16, m=12)
        plan = FramePlan(numerology=num, k_f=1, k_t=1, q_s=4, q_r=4)
        re_map = build_re_map(plan)
        assert re_map.n_sensing == 16 * 12

    def test_pattern_is_periodic_and_deterministic(self):
        num = fr2_numerology(n=64, m=48)
        plan = FramePlan(numerology=num, k_f=4, k_t=6)
        a = build_re_map(plan)
        b = build_re_map(plan)
        assert (a.classification == b.classification).all()
        cls = a.classification
        n_idx, m_idx = np.meshgrid(np.arange(64), np.arange(48), indexing="ij")
        expected = (n_idx % 4 == 0) & (m_idx % 6 == 0)
        assert ((cls == RE_SENSING) == expected).all()

    def test_scan_order_is_frequency_major(self):
        num = fr2_numerology(n=12, m=14)
        plan = FramePlan(numerology=num, k_f=4, k_t=4)
        re_map = build_re_map(plan)
        rows, cols = re_map.regular_idx
        # symbol index never decreases; within a symbol, subcarriers ascend
        order = np.lexsort((rows, cols))
        assert (order == np.arange(rows.size)).all()

    def test_comm_centric_has_no_sensing_grid(self):
        plan = FramePlan(numerology=fr2_numerology(n=16, m=12), k_f=4, k_t=4,
                         mode="comm_centric")
        re_map = build_re_map(plan)
        assert re_map.n_sensing == 0
        assert re_map.n_regular == 16 * 12

    def test_filler_assignment_paper_scale(self):
        # sensing: 27720*2 = 55440 bits = 54*1024 + 144; 144 <= 512 so the
        # tail 72 REs degenerate to filler. regular: 415800*4 bits leave a
        # 224-bit tail -> 56 filler REs.
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4)
        re_map = build_re_map(plan, codeword_len=1024, n_parity=512)
        assert re_map.filler_sensing_idx[0].size == 72
        assert re_map.filler_regular_idx[0].size == 56
        assert re_map.n_sensing == 27720 - 72
        assert (re_map.classification == RE_FILLER).sum() == 72 + 56

    def test_no_filler_when_tail_carries_information(self):
        # desk scale: sensing 1344*2 = 2688 = 2*1024 + 640 > 512 -> shortened
        num = fr2_numerology(n=192, m=112)
        plan = FramePlan(numerology=num, k_f=4, k_t=4)
        re_map = build_re_map(plan, codeword_len=1024, n_parity=512)
        assert re_map.filler_sensing_idx[0].size == 0
        assert re_map.filler_regular_idx[0].size == 0

    def test_pilots_only_sensing_never_filler(self):
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4, mode="pilots_only")
        re_map = build_re_map(plan, codeword_len=1024, n_parity=512)
        assert re_map.n_sensing == 27720
        assert re_map.filler_sensing_idx[0].size == 0
        assert re_map.filler_regular_idx[0].size == 56

    def test_classification_codes_cover_grid(self):
        plan = FramePlan(numerology=fr2_numerology(n=40, m=28), k_f=4, k_t=4)
        re_map = build_re_map(plan, codeword_len=1024, n_parity=512)
        cls = re_map.classification
        assert set(np.unique(cls)) <= {RE_REGULAR, RE_SENSING, RE_FILLER}
        assert re_map.n_sensing + re_map.n_regular + re_map.n_filler == 40 * 28


class TestPlanValidation:
    def test_rejects_bad_orders(self):
        with pytest.raises(ValueError):
            FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4, q_s=4, q_r=2)
        with pytest.raises(ValueError):
            FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4, q_s=3)

    def test_rejects_out_of_range_spacings(self):
        with pytest.raises(ValueError):
            FramePlan(numerology=fr2_numerology(n=8, m=8), k_f=9, k_t=4)

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4, mode="other")

    def test_derive_plan_matches_table(self):
        plan = derive_plan(fr2_numerology(), req())
        assert plan.k_f == 4 and plan.k_t == 4

    def test_summary_mentions_key_quantities(self):
        plan = FramePlan(numerology=fr2_numerology(), k_f=4, k_t=4)
        text = plan_summary(plan, req())
        assert "K_F 4" in text and "27720" in text
        assert "1.9375" in text and "eta 2 bit/RE" in text
        # both ambiguity conventions are surfaced
        assert "factor 2" in text and "wrap" in text
