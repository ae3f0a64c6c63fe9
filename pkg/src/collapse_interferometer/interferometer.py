"""The four-beam-splitter two-photon network and its lab-frame timing.

Wiring (mode names as in :data:`~collapse_interferometer.fock.STANDARD_MODES`)::

    in_A --A--> a1 --\\            /--> c1
               \\--> a2 ~tau~ \\   C  --> c2
    in_B --B--> b1 --/   \\    D  --> d1
               \\--> b2 ~tau~/   \\--> d2

A splits in_A into (a1, a2), B splits in_B into (b1, b2), C combines (a1, b1)
into (c1, c2) and D combines the delayed legs (a2, b2) into (d1, d2).  Photons
are point particles moving at speed ``c``; the delay shifts arrival times only.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .errors import DomainError, GeometryError, ModeError, TopologyError, UnitarityError
from .fock import (
    ALGEBRA_TOL,
    STANDARD_REGISTRY,
    Occupation,
    PureState,
    create,
    fix_global_phase,
    make_vacuum,
)

DETECTORS = ("c1", "c2", "d1", "d2")
LEFT_DETECTORS = ("c1", "c2")
RIGHT_DETECTORS = ("d1", "d2")
DELAYED_LEGS = ("a2", "b2")

# |tau - l/c| at or below this is reported as the Boundary scenario.
BOUNDARY_TOL = 1e-9

SQRT_HALF = 1 / math.sqrt(2)


@dataclass(frozen=True)
class BeamSplitter:
    """Two-port linear optical element.

    The transfer matrix is ``[[t_prime, r], [r_prime, t]]``: column ``k`` lists
    the output-mode coefficients that the creation operator of input ``k`` is
    rewritten into.  An input given as ``None`` is an unused (vacuum) port.
    """

    label: str
    inputs: tuple[Optional[str], Optional[str]]
    outputs: tuple[str, str]
    r: complex = 1j * SQRT_HALF
    r_prime: complex = 1j * SQRT_HALF
    t: complex = SQRT_HALF
    t_prime: complex = SQRT_HALF

    def __post_init__(self) -> None:
        r, rp, t, tp = self.r, self.r_prime, self.t, self.t_prime
        if abs(abs(rp) - abs(r)) > ALGEBRA_TOL or abs(abs(tp) - abs(t)) > ALGEBRA_TOL:
            raise UnitarityError(f"beam splitter {self.label}: |r'| != |r| or |t'| != |t|")
        if abs(abs(r) ** 2 + abs(t) ** 2 - 1) > ALGEBRA_TOL:
            raise UnitarityError(f"beam splitter {self.label}: |r|^2 + |t|^2 != 1")
        u = self.matrix
        if not np.allclose(u.conj().T @ u, np.eye(2), rtol=0, atol=ALGEBRA_TOL):
            raise UnitarityError(f"beam splitter {self.label}: transfer matrix is not unitary")
        used = [m for m in self.inputs if m is not None]
        if len(set(used + list(self.outputs))) != len(used) + 2:
            raise TopologyError(f"beam splitter {self.label}: input and output modes must be distinct")

    @classmethod
    def symmetric(cls, label: str, inputs, outputs) -> "BeamSplitter":
        return cls(label, tuple(inputs), tuple(outputs))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.t_prime, self.r], [self.r_prime, self.t]], dtype=complex)


def _binomial_expansion(a: complex, b: complex, n: int) -> list[tuple[int, complex]]:
    """(a x + b y)^n as [(power of x, coefficient)]."""
    return [(k, math.comb(n, k) * a**k * b ** (n - k)) for k in range(n + 1)]


def apply_beam_splitter(state: PureState, bs: BeamSplitter) -> PureState:
    """Rewrite every input-mode creation operator as its output combination.

    Photons already sitting in an output mode are carried along unchanged.
    The map is norm-preserving on states whose output modes are empty, which
    is always the case inside the network.
    """
    reg = state.registry
    for mode in (*bs.inputs, *bs.outputs):
        if mode is not None and mode not in reg:
            raise ModeError(f"beam splitter {bs.label} uses mode {mode!r} absent from the registry")
    u = bs.matrix
    in_idx = [reg.index(m) if m is not None else None for m in bs.inputs]
    o1, o2 = (reg.index(m) for m in bs.outputs)

    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        # Basis amplitude -> monomial coefficient: divide by sqrt(prod n!).
        counts = list(occ)
        coef = amp / math.sqrt(math.prod(math.factorial(n) for n in occ))
        # Each input contributes a polynomial in (out1, out2).
        poly: dict[tuple[int, int], complex] = {(0, 0): 1.0 + 0j}
        for k, i in enumerate(in_idx):
            if i is None or counts[i] == 0:
                continue
            n = counts[i]
            counts[i] = 0
            poly = _poly_mul(poly, _binomial_expansion(u[0, k], u[1, k], n), n)
        for (p1, p2), c in poly.items():
            new = list(counts)
            new[o1] += p1
            new[o2] += p2
            key = tuple(new)
            val = coef * c * math.sqrt(math.prod(math.factorial(m) for m in key))
            out[key] = out.get(key, 0j) + val
    return PureState(reg, out)


def _poly_mul(
    poly: dict[tuple[int, int], complex], factor: list[tuple[int, complex]], n: int
) -> dict[tuple[int, int], complex]:
    result: dict[tuple[int, int], complex] = {}
    for (p1, p2), c1 in poly.items():
        for q, c2 in factor:
            key = (p1 + q, p2 + n - q)
            result[key] = result.get(key, 0j) + c1 * c2
    return result


def apply_phase(state: PureState, mode: str, phase: float) -> PureState:
    """Multiply each basis amplitude by exp(i * phase * n_mode)."""
    if phase == 0:
        return state
    i = state.registry.index(mode)
    return PureState(
        state.registry,
        {occ: amp * cmath.exp(1j * phase * occ[i]) for occ, amp in state.amplitudes.items()},
    )


def standard_beam_splitters() -> dict[str, BeamSplitter]:
    # Port order reproduces the published single-photon routes, e.g.
    # in_A -> (a1 + i a2)/sqrt2 and a2 -> (i d1 + d2)/sqrt2.
    return {
        "A": BeamSplitter.symmetric("A", ("in_A", None), ("a1", "a2")),
        "B": BeamSplitter.symmetric("B", (None, "in_B"), ("b1", "b2")),
        "C": BeamSplitter.symmetric("C", ("b1", "a1"), ("c1", "c2")),
        "D": BeamSplitter.symmetric("D", ("b2", "a2"), ("d1", "d2")),
    }


# label -> (set of used inputs, set of outputs) for the fixed topology.
_WIRING = {
    "A": ({"in_A"}, {"a1", "a2"}),
    "B": ({"in_B"}, {"b1", "b2"}),
    "C": ({"a1", "b1"}, {"c1", "c2"}),
    "D": ({"a2", "b2"}, {"d1", "d2"}),
}


class ScenarioClass(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class InterferometerSpec:
    """Geometry and components of the network.

    ``L`` is the arm length, ``l`` the beam-splitter-to-detector distance, ``c``
    the propagation speed and ``tau`` the delay inserted on legs a2 and b2.
    ``leg_phases`` optionally attaches an optical phase to the delayed legs;
    it defaults to zero (delay is timing only).
    """

    L: float
    l: float
    c: float
    tau: float
    splitters: Mapping[str, BeamSplitter] = field(default_factory=standard_beam_splitters)
    leg_phases: Mapping[str, float] = field(default_factory=lambda: {leg: 0.0 for leg in DELAYED_LEGS})

    def __post_init__(self) -> None:
        for name in ("L", "l", "c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} must be a positive finite number, got {value!r}")
        if not math.isfinite(self.tau) or self.tau < 0:
            raise DomainError(f"tau must be >= 0, got {self.tau!r}")
        unknown = set(self.leg_phases) - set(DELAYED_LEGS)
        if unknown:
            raise ModeError(f"phases may only be set on delayed legs {DELAYED_LEGS}, got {sorted(unknown)}")

    @property
    def detector_delay(self) -> float:
        """l/c, the threshold delay separating scenarios II and III."""
        return self.l / self.c

    def with_tau(self, tau: float) -> "InterferometerSpec":
        return replace(self, tau=tau)


def build_standard_interferometer(
    L: float = 1.0,
    l: float = 1.0,
    c: float = 1.0,
    tau: float = 0.0,
    leg_phases: Mapping[str, float] | None = None,
) -> InterferometerSpec:
    phases = {leg: 0.0 for leg in DELAYED_LEGS}
    phases.update(leg_phases or {})
    return InterferometerSpec(L=L, l=l, c=c, tau=tau, leg_phases=phases)


def check_wiring(spec: InterferometerSpec) -> None:
    if set(spec.splitters) != set(_WIRING):
        raise TopologyError(f"expected beam splitters {sorted(_WIRING)}, got {sorted(spec.splitters)}")
    for label, (ins, outs) in _WIRING.items():
        bs = spec.splitters[label]
        used = {m for m in bs.inputs if m is not None}
        if used != ins or set(bs.outputs) != outs:
            raise TopologyError(
                f"beam splitter {label} is wired {sorted(used)} -> {sorted(bs.outputs)}, "
                f"expected {sorted(ins)} -> {sorted(outs)}"
            )


def propagate_full(spec: InterferometerSpec, inputs: tuple[str, ...] = ("in_A", "in_B")) -> PureState:
    """Joint state of the input photons on the detector legs.

    With both photons injected, the global phase is fixed so that the
    |c1, d2> amplitude is real and negative.
    """
    check_wiring(spec)
    state = make_vacuum(STANDARD_REGISTRY)
    for mode in inputs:
        if mode not in ("in_A", "in_B"):
            raise ModeError(f"photons can only be injected at in_A or in_B, got {mode!r}")
        state = create(state, mode)
    state = state.scaled(1 / state.norm)
    for label in ("A", "B", "C"):
        state = apply_beam_splitter(state, spec.splitters[label])
    for leg in DELAYED_LEGS:
        state = apply_phase(state, leg, spec.leg_phases.get(leg, 0.0))
    state = apply_beam_splitter(state, spec.splitters["D"])

    det_idx = {STANDARD_REGISTRY.index(m) for m in DETECTORS}
    for occ in state.amplitudes:
        stray = [STANDARD_REGISTRY.names[i] for i, n in enumerate(occ) if n and i not in det_idx]
        if stray:
            raise TopologyError(f"photons left undetected in legs {stray}")
    return fix_global_phase(state, STANDARD_REGISTRY.occupation(c1=1, d2=1), math.pi)


@dataclass(frozen=True)
class TimingTable:
    """Lab-frame event times; photons enter A and B at t = 0.

    ``left_offset`` (= l/c) and ``d_passage_offset`` (= tau) are the same events
    measured from ``reference`` (= L/c), kept separately so that comparisons
    survive very large arm lengths without cancellation.
    """

    reference: float
    passages: Mapping[str, float]
    arrivals: Mapping[str, float]
    left_offset: float
    d_passage_offset: float


def passage_times(spec: InterferometerSpec) -> TimingTable:
    ref = spec.L / spec.c
    left = spec.l / spec.c
    return TimingTable(
        reference=ref,
        passages={"A": 0.0, "B": 0.0, "C": ref, "D": ref + spec.tau},
        arrivals={
            "c1": ref + left,
            "c2": ref + left,
            "d1": ref + left + spec.tau,
            "d2": ref + left + spec.tau,
        },
        left_offset=left,
        d_passage_offset=spec.tau,
    )


def classify_scenario(spec: InterferometerSpec) -> ScenarioClass:
    if spec.tau == 0:
        return ScenarioClass.I
    threshold = spec.detector_delay
    if abs(spec.tau - threshold) <= BOUNDARY_TOL:
        return ScenarioClass.BOUNDARY
    return ScenarioClass.II if spec.tau < threshold else ScenarioClass.III
