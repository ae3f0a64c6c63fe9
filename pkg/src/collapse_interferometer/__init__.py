"""Exact and Monte Carlo simulation of a two-photon, four-beam-splitter
interferometer under pluggable wavefunction-collapse semantics."""

from .collapse import (
    Anchoring,
    Branch,
    Coherent,
    CollapseOutcome,
    Delta,
    Histogram,
    PositionalFiniteDuration,
    PositionalInstant,
    Uniform,
    evolve_upstream_mixture_through_D,
    positional_collapse_upstream,
    project_on_first_detection,
    resolve_remaining_photon,
    sample_collapse_time,
)
from .experiment import (
    CorrelationReport,
    SweepCurve,
    TrialOutcome,
    Trials,
    correlation_estimate,
    count_reduction_curve,
    detect_jump,
    exact_correlation,
    exact_outcome_table,
    post_select,
    run_trials,
    sweep_tau,
)
from .fock import (
    STANDARD_REGISTRY,
    FockBasisState,
    MixedState,
    ModeRegistry,
    PureState,
    annihilate,
    create,
    density_matrix_element,
    inner_product,
    make_vacuum,
    mix_ensemble,
    normalize,
    number_expectation,
)
from .interferometer import (
    BeamSplitter,
    InterferometerSpec,
    ScenarioClass,
    apply_beam_splitter,
    build_standard_interferometer,
    classify_scenario,
    passage_times,
    propagate_full,
)

__version__ = "0.1.0"
