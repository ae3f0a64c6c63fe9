"""Collapse semantics: what happens to the undetected photon after the first
(left-side) detection.

Three hypotheses are supported side by side:

``Coherent``
    Standard unitary evolution with projection only at detection.  The
    remaining photon is the conditional state of the joint wavefunction,
    whatever the delay.
``PositionalInstant``
    The first detection instantly localizes the partner.  If the partner has
    already crossed beam splitter D it is projected as under ``Coherent``;
    if it is still on leg a2 or b2 it becomes an equal classical mixture of
    the two legs, which D then splits incoherently.
``PositionalFiniteDuration``
    Same dichotomy, but the collapse instant is drawn from a distribution
    over a detector window of finite width.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    EmptyBranchError,
    ModeError,
    NormalizationError,
    SupportError,
    TimingContractError,
    VariantError,
)
from .fock import (
    STANDARD_REGISTRY,
    WEIGHT_TOL,
    MixedState,
    PureState,
    basis_state,
    mix_ensemble,
    normalize,
)
from .interferometer import (
    DELAYED_LEGS,
    LEFT_DETECTORS,
    RIGHT_DETECTORS,
    BeamSplitter,
    InterferometerSpec,
    TimingTable,
    apply_beam_splitter,
    apply_phase,
    passage_times,
)


class Anchoring(enum.Enum):
    """Where the detector window sits relative to the photon's arrival.

    PRE_READING: ``[t_arrival - window, t_arrival]`` (arrival is the reading).
    POST_ARRIVAL: ``[t_arrival, t_arrival + window]`` (detection starts on arrival).
    """

    PRE_READING = "pre_reading"
    POST_ARRIVAL = "post_arrival"


class Branch(enum.Enum):
    UPSTREAM_MIXTURE = "upstream-mixture"
    DOWNSTREAM_PROJECTION = "downstream-projection"


# Window-shape distributions.  ``x`` and the return of ``ppf`` are offsets
# from the window start, in time units; ``width`` is the window width.


@dataclass(frozen=True)
class Uniform:
    def cdf(self, x, width: float):
        return np.clip(np.asarray(x, dtype=float) / width, 0.0, 1.0)

    def ppf(self, u, width: float):
        return np.asarray(u, dtype=float) * width


@dataclass(frozen=True)
class Delta:
    offset: float = 0.0

    def cdf(self, x, width: float):
        # Inclusive: a collapse exactly at x counts as "at or before x".
        return (np.asarray(x, dtype=float) >= self.offset).astype(float)

    def ppf(self, u, width: float):
        return np.full_like(np.asarray(u, dtype=float), self.offset)


@dataclass(frozen=True)
class Histogram:
    """Piecewise-constant density over equal-width bins spanning the window."""

    bins: tuple[float, ...]
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=float)
        if bins.ndim != 1 or bins.size == 0:
            raise NormalizationError("histogram needs at least one bin")
        if np.any(bins < 0):
            raise NormalizationError("histogram bins must be non-negative")
        if abs(bins.sum() - 1.0) > WEIGHT_TOL:
            raise NormalizationError(f"histogram bins sum to {bins.sum()!r}, expected 1")
        object.__setattr__(self, "bins", tuple(float(b) for b in bins))
        cum = np.concatenate([[0.0], np.cumsum(bins / bins.sum())])
        cum[-1] = 1.0
        object.__setattr__(self, "_cum", cum)

    def _edges(self, width: float) -> np.ndarray:
        return np.linspace(0.0, width, len(self.bins) + 1)

    def cdf(self, x, width: float):
        return np.interp(np.asarray(x, dtype=float), self._edges(width), self._cum)

    def ppf(self, u, width: float):
        u = np.asarray(u, dtype=float)
        edges = self._edges(width)
        # Right-continuous inverse: locate the bin, then interpolate inside it.
        k = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, len(self.bins) - 1)
        mass = np.asarray(self.bins)[k]
        frac = np.divide(u - self._cum[k], mass, out=np.zeros_like(u), where=mass > 0)
        return edges[k] + np.clip(frac, 0.0, 1.0) * (edges[k + 1] - edges[k])


Distribution = Union[Uniform, Delta, Histogram]


@dataclass(frozen=True)
class Coherent:
    name = "coherent"


@dataclass(frozen=True)
class PositionalInstant:
    name = "positional_instant"


@dataclass(frozen=True)
class PositionalFiniteDuration:
    window: float
    distribution: Distribution = field(default_factory=Uniform)
    anchoring: Anchoring = Anchoring.PRE_READING
    name = "finite_duration"

    def __post_init__(self) -> None:
        if not np.isfinite(self.window) or self.window <= 0:
            raise ValueError(f"detector window must be > 0, got {self.window!r}")
        if isinstance(self.distribution, Delta) and not 0 <= self.distribution.offset <= self.window:
            raise ValueError(
                f"delta offset {self.distribution.offset!r} lies outside the window [0, {self.window}]"
            )
        object.__setattr__(self, "anchoring", Anchoring(self.anchoring))

    def window_start(self, t_reading):
        if self.anchoring is Anchoring.PRE_READING:
            return t_reading - self.window
        return t_reading

    def collapse_times(self, t_reading, u):
        """Inverse-transform map from uniforms ``u`` to collapse times."""
        return self.window_start(t_reading) + self.distribution.ppf(u, self.window)

    def probability_at_or_before(self, t_reading: float, t: float) -> float:
        return float(self.distribution.cdf(t - self.window_start(t_reading), self.window))


CollapseSemantics = Union[Coherent, PositionalInstant, PositionalFiniteDuration]


@dataclass(frozen=True)
class CollapseOutcome:
    remaining: Union[PureState, MixedState]
    branch: Branch
    collapse_time: Optional[float] = None


def _require_left(detector: str) -> None:
    if detector not in LEFT_DETECTORS:
        raise ModeError(f"first detection must be at a left detector {LEFT_DETECTORS}, got {detector!r}")


def project_on_first_detection(joint: PureState, detector: str) -> PureState:
    """Condition on exactly one photon at ``detector`` and remove it."""
    _require_left(detector)
    i = joint.registry.index(detector)
    kept = {
        occ[:i] + (0,) + occ[i + 1 :]: amp
        for occ, amp in joint.amplitudes.items()
        if occ[i] == 1
    }
    conditional = PureState(joint.registry, kept)
    if conditional.norm < 1e-12:
        raise EmptyBranchError(f"the joint state has no component with a single photon at {detector}")
    return normalize(conditional)


def positional_collapse_upstream(
    detector: str,
    timing: TimingTable | None = None,
    collapse_offset: float | None = None,
) -> MixedState:
    """Equal mixture of one photon on a2 and one photon on b2.

    When ``timing`` is supplied the call is checked against it: the collapse
    (offset from ``timing.reference``; default the left-detector arrival) must
    not come after the partner's passage of D.
    """
    _require_left(detector)
    if timing is not None:
        when = timing.left_offset if collapse_offset is None else collapse_offset
        if when > timing.d_passage_offset:
            raise TimingContractError(
                "partner photon has already passed beam splitter D at the collapse time; "
                "use project_on_first_detection"
            )
    return mix_ensemble([(0.5, basis_state(STANDARD_REGISTRY, a2=1)), (0.5, basis_state(STANDARD_REGISTRY, b2=1))])


def evolve_upstream_mixture_through_D(
    rho: MixedState,
    bs_D: BeamSplitter,
    leg_phases: dict[str, float] | None = None,
) -> MixedState:
    support = {rho.registry.index(m) for m in DELAYED_LEGS}
    for psi in rho.members:
        for occ in psi.amplitudes:
            if any(n and i not in support for i, n in enumerate(occ)):
                raise SupportError(f"mixture has photons outside {DELAYED_LEGS}")

    def through(psi: PureState) -> PureState:
        for leg, phase in (leg_phases or {}).items():
            psi = apply_phase(psi, leg, phase)
        return apply_beam_splitter(psi, bs_D)

    return rho.map_members(through)


def sample_collapse_time(model: CollapseSemantics, t_reading: float, rng: np.random.Generator) -> float:
    if not isinstance(model, PositionalFiniteDuration):
        raise VariantError(f"{type(model).__name__} has no collapse-time distribution")
    return float(model.collapse_times(t_reading, rng.random()))


def upstream_probability(spec: InterferometerSpec, model: CollapseSemantics) -> float:
    """Probability that the collapse happens while the partner is still upstream of D."""
    timing = passage_times(spec)
    if isinstance(model, Coherent):
        return 0.0
    if isinstance(model, PositionalInstant):
        return 1.0 if timing.d_passage_offset >= timing.left_offset else 0.0
    if isinstance(model, PositionalFiniteDuration):
        return model.probability_at_or_before(timing.left_offset, timing.d_passage_offset)
    raise VariantError(f"unknown collapse semantics {model!r}")


def resolve_remaining_photon(
    joint: PureState,
    detector: str,
    spec: InterferometerSpec,
    model: CollapseSemantics,
    rng: np.random.Generator | None = None,
) -> CollapseOutcome:
    projected = project_on_first_detection(joint, detector)
    timing = passage_times(spec)

    if isinstance(model, Coherent):
        return CollapseOutcome(projected, Branch.DOWNSTREAM_PROJECTION)
    if isinstance(model, PositionalInstant):
        offset = timing.left_offset
        collapse_time = None
    elif isinstance(model, PositionalFiniteDuration):
        if rng is None:
            raise ValueError("finite-duration collapse needs a random stream")
        offset = sample_collapse_time(model, timing.left_offset, rng)
        collapse_time = timing.reference + offset
    else:
        raise VariantError(f"unknown collapse semantics {model!r}")

    # Ties go upstream.
    if offset <= timing.d_passage_offset:
        rho = positional_collapse_upstream(detector, timing, offset)
        rho = evolve_upstream_mixture_through_D(rho, spec.splitters["D"], dict(spec.leg_phases))
        return CollapseOutcome(rho, Branch.UPSTREAM_MIXTURE, collapse_time)
    return CollapseOutcome(projected, Branch.DOWNSTREAM_PROJECTION, collapse_time)


def detection_probabilities(
    remaining: PureState | MixedState, detectors: tuple[str, ...] = RIGHT_DETECTORS
) -> dict[str, float]:
    """P(the single remaining photon is found at each detector)."""
    diag = remaining.diagonal() if isinstance(remaining, MixedState) else remaining.probabilities()
    reg = remaining.registry
    probs = {}
    for det in detectors:
        target = reg.occupation({det: 1}).occupations
        probs[det] = diag.get(target, 0.0)
    return probs
