import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from collapse_interferometer.collapse import (
    Anchoring,
    Branch,
    Coherent,
    Delta,
    Histogram,
    PositionalFiniteDuration,
    PositionalInstant,
    Uniform,
    detection_probabilities,
    evolve_upstream_mixture_through_D,
    positional_collapse_upstream,
    project_on_first_detection,
    resolve_remaining_photon,
    sample_collapse_time,
    upstream_probability,
)
from collapse_interferometer.errors import (
    EmptyBranchError,
    NormalizationError,
    SupportError,
    TimingContractError,
    VariantError,
)
from collapse_interferometer.fock import (
    STANDARD_REGISTRY,
    MixedState,
    PureState,
    basis_state,
    density_matrix_element,
    mix_ensemble,
    states_equal_up_to_phase,
)
from collapse_interferometer.interferometer import build_standard_interferometer, passage_times, standard_beam_splitters

from oracles import overlap_p_d2

R = STANDARD_REGISTRY
D = standard_beam_splitters()["D"]


def p_d2(outcome) -> float:
    return detection_probabilities(outcome.remaining)["d2"]


class TestProjection:
    def test_c1_leaves_partner_on_d2(self, joint):
        assert states_equal_up_to_phase(project_on_first_detection(joint, "c1"), basis_state(R, d2=1))

    def test_c2_leaves_partner_on_d1(self, joint):
        assert states_equal_up_to_phase(project_on_first_detection(joint, "c2"), basis_state(R, d1=1))

    def test_empty_branch(self):
        with pytest.raises(EmptyBranchError):
            project_on_first_detection(basis_state(R, c2=2), "c1")


class TestUpstreamMixture:
    @pytest.mark.parametrize("det", ["c1", "c2"])
    def test_equal_mixture(self, det):
        rho = positional_collapse_upstream(det)
        assert rho.weights == (0.5, 0.5)
        assert states_equal_up_to_phase(rho.members[0], basis_state(R, a2=1))
        assert states_equal_up_to_phase(rho.members[1], basis_state(R, b2=1))
        assert rho.trace == pytest.approx(1.0)

    def test_timing_contract(self, unit_spec):
        with pytest.raises(TimingContractError):
            positional_collapse_upstream("c1", passage_times(unit_spec.with_tau(0.5)))
        positional_collapse_upstream("c1", passage_times(unit_spec.with_tau(2.0)))

    def test_evolved_diagonal_and_coherence(self):
        rho = evolve_upstream_mixture_through_D(positional_collapse_upstream("c1"), D)
        d1, d2 = R.occupation(d1=1), R.occupation(d2=1)
        assert density_matrix_element(rho, d1, d1).real == pytest.approx(0.5, abs=1e-12)
        assert density_matrix_element(rho, d2, d2).real == pytest.approx(0.5, abs=1e-12)
        assert abs(density_matrix_element(rho, d1, d2)) < 1e-12

    def test_pure_a2_keeps_coherence(self):
        # a2 -> (i d1 + d2)/sqrt2:  <d1|rho|d2> = (i/sqrt2)(1/sqrt2) = i/2
        rho = evolve_upstream_mixture_through_D(mix_ensemble([(1.0, basis_state(R, a2=1))]), D)
        d1, d2 = R.occupation(d1=1), R.occupation(d2=1)
        assert density_matrix_element(rho, d1, d1).real == pytest.approx(0.5)
        assert density_matrix_element(rho, d1, d2) == pytest.approx(0.5j, abs=1e-12)

    def test_support_error(self):
        with pytest.raises(SupportError):
            evolve_upstream_mixture_through_D(mix_ensemble([(1.0, basis_state(R, a1=1))]), D)


class TestDistributions:
    def test_delta_at_window_start(self):
        model = PositionalFiniteDuration(1.0, Delta(0.0), Anchoring.PRE_READING)
        rng = np.random.default_rng(1)
        assert {sample_collapse_time(model, 2.0, rng) for _ in range(20)} == {1.0}

    def test_uniform_mean(self):
        model = PositionalFiniteDuration(1.0, Uniform(), Anchoring.PRE_READING)
        rng = np.random.default_rng(2)
        draws = np.array([sample_collapse_time(model, 2.0, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 1.5) < 0.01
        assert draws.min() >= 1.0 and draws.max() <= 2.0

    def test_single_bin_histogram_matches_uniform(self):
        hist = PositionalFiniteDuration(1.0, Histogram((1.0,)))
        uni = PositionalFiniteDuration(1.0, Uniform())
        a = hist.collapse_times(0.0, np.random.default_rng(3).random(100_000))
        b = uni.collapse_times(0.0, np.random.default_rng(4).random(100_000))
        assert stats.ks_2samp(a, b).statistic < 0.01

    def test_histogram_cdf_and_inverse_agree(self):
        h = Histogram((0.1, 0.0, 0.6, 0.3))
        u = np.linspace(0, 1, 101)
        x = h.ppf(u, 2.0)
        assert np.all(np.diff(x) >= 0)
        assert np.allclose(h.cdf(x, 2.0), u, atol=1e-12)

    def test_histogram_validation(self):
        with pytest.raises(NormalizationError):
            Histogram((0.5, 0.6))
        with pytest.raises(NormalizationError):
            Histogram((1.2, -0.2))

    def test_variant_error(self):
        with pytest.raises(VariantError):
            sample_collapse_time(PositionalInstant(), 0.0, np.random.default_rng())

    def test_window_must_be_positive(self):
        with pytest.raises(ValueError):
            PositionalFiniteDuration(0.0)


class TestResolve:
    def test_instant_below_threshold_projects(self, joint):
        spec = build_standard_interferometer(tau=0.5)
        out = resolve_remaining_photon(joint, "c1", spec, PositionalInstant())
        assert out.branch is Branch.DOWNSTREAM_PROJECTION
        assert states_equal_up_to_phase(out.remaining, basis_state(R, d2=1))

    def test_instant_above_threshold_mixes(self, joint):
        spec = build_standard_interferometer(tau=2.0)
        out = resolve_remaining_photon(joint, "c1", spec, PositionalInstant())
        assert out.branch is Branch.UPSTREAM_MIXTURE
        assert detection_probabilities(out.remaining) == pytest.approx({"d1": 0.5, "d2": 0.5})

    def test_coherent_never_mixes(self, joint):
        out = resolve_remaining_photon(joint, "c1", build_standard_interferometer(tau=2.0), Coherent())
        assert states_equal_up_to_phase(out.remaining, basis_state(R, d2=1))

    @given(st.floats(0, 5), st.floats(0, 5))
    def test_coherent_independent_of_delay(self, t1, t2):
        from collapse_interferometer.interferometer import propagate_full

        j = propagate_full(build_standard_interferometer())
        a = resolve_remaining_photon(j, "c1", build_standard_interferometer(tau=t1), Coherent())
        b = resolve_remaining_photon(j, "c1", build_standard_interferometer(tau=t2), Coherent())
        assert states_equal_up_to_phase(a.remaining, b.remaining)

    @given(st.floats(0, 3))
    def test_instant_piecewise_constant(self, tau):
        from collapse_interferometer.interferometer import propagate_full

        j = propagate_full(build_standard_interferometer())
        spec = build_standard_interferometer(tau=tau)
        inst = resolve_remaining_photon(j, "c1", spec, PositionalInstant())
        if tau < 1:
            coh = resolve_remaining_photon(j, "c1", spec, Coherent())
            assert states_equal_up_to_phase(inst.remaining, coh.remaining)
        else:
            assert isinstance(inst.remaining, MixedState)
            assert p_d2(inst) == pytest.approx(0.5, abs=1e-12)

    def test_finite_duration_quarter_window(self, joint):
        # Delay l/c - window/4 under the pre-reading window: the Monte Carlo
        # P(d2) must land inside the [5/8, 7/8] band and match quadrature.
        window = 0.4
        spec = build_standard_interferometer(tau=1.0 - window / 4)
        rng = np.random.default_rng(11)
        results = {}
        for anchoring in Anchoring:
            model = PositionalFiniteDuration(window, Uniform(), anchoring)
            mean = np.mean([p_d2(resolve_remaining_photon(joint, "c1", spec, model, rng)) for _ in range(20_000)])
            results[anchoring.value] = mean
            assert mean == pytest.approx(overlap_p_d2(anchoring.value, 1.0, window, spec.tau), abs=0.01)
        assert 5 / 8 - 0.01 <= results["pre_reading"] <= 7 / 8 + 0.01
        # which convention reproduces the 7/8 ratio at this delay: neither;
        # post-arrival needs the delay l/c + window/4 instead.
        assert results["pre_reading"] == pytest.approx(5 / 8, abs=0.01)
        assert results["post_arrival"] == pytest.approx(1.0, abs=1e-12)
        later = build_standard_interferometer(tau=1.0 + window / 4)
        post = PositionalFiniteDuration(window, Uniform(), Anchoring.POST_ARRIVAL)
        assert upstream_probability(later, post) == pytest.approx(0.25)

    def test_collapse_time_reported(self, joint):
        model = PositionalFiniteDuration(0.5, Delta(0.0), Anchoring.POST_ARRIVAL)
        out = resolve_remaining_photon(joint, "c1", build_standard_interferometer(tau=1.0), model,
                                       np.random.default_rng(0))
        assert out.collapse_time == pytest.approx(2.0)
        assert out.branch is Branch.UPSTREAM_MIXTURE  # tie at D-passage goes upstream

    def test_small_window_converges_to_instant(self, joint):
        window = 1e-6
        rng = np.random.default_rng(5)
        for tau in (0.5, 1.0 - 2 * window, 1.0 + 2 * window, 2.0):
            spec = build_standard_interferometer(tau=tau)
            inst = p_d2(resolve_remaining_photon(joint, "c1", spec, PositionalInstant()))
            model = PositionalFiniteDuration(window)
            fd = np.mean([p_d2(resolve_remaining_photon(joint, "c1", spec, model, rng)) for _ in range(2000)])
            assert abs(fd - inst) < 1e-3

    @settings(max_examples=40)
    @given(st.floats(0.01, 2.0), st.floats(0, 3), st.sampled_from(list(Anchoring)), st.integers(0, 1000))
    def test_convexity_and_normalization(self, window, tau, anchoring, seed):
        from collapse_interferometer.interferometer import propagate_full

        j = propagate_full(build_standard_interferometer())
        model = PositionalFiniteDuration(window, Uniform(), anchoring)
        out = resolve_remaining_photon(j, "c1", build_standard_interferometer(tau=tau), model,
                                       np.random.default_rng(seed))
        assert 0.5 - 1e-12 <= p_d2(out) <= 1 + 1e-12
        if isinstance(out.remaining, MixedState):
            assert abs(out.remaining.trace - 1) < 1e-12
        else:
            assert isinstance(out.remaining, PureState) and abs(out.remaining.norm - 1) < 1e-12
        exact = upstream_probability(build_standard_interferometer(tau=tau), model)
        assert 0 <= exact <= 1
