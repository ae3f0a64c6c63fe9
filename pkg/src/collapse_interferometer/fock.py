"""Sparse second-quantized state algebra over a small, named set of bosonic modes.

States are immutable.  A :class:`PureState` maps occupation vectors (tuples of
photon counts aligned with a :class:`ModeRegistry`) to complex amplitudes;
a :class:`MixedState` is a weighted ensemble of pure states.  Every operation
returns a fresh value.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateStateError,
    IncompatibleSpaceError,
    ModeError,
    NormalizationError,
    RegistryError,
)

# Centralized tolerances.
ALGEBRA_TOL = 1e-12
WEIGHT_TOL = 1e-9
# Amplitudes smaller than this are dropped after every linear combination
# (bookkeeping only, not physics).
PRUNE_THRESHOLD = 1e-15

STANDARD_MODES = ("in_A", "in_B", "a1", "a2", "b1", "b2", "c1", "c2", "d1", "d2")

Occupation = tuple[int, ...]


class ModeRegistry:
    """An ordered, immutable set of mode names."""

    __slots__ = ("_names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise RegistryError("mode registry must not be empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise RegistryError(f"duplicate mode names: {dupes}")
        self._names = names
        self._index = {name: i for i, name in enumerate(names)}

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ModeRegistry) and other._names == self._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"ModeRegistry({list(self._names)!r})"

    def index(self, mode: str) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise ModeError(f"unknown mode {mode!r}; registry is {list(self._names)}") from None

    def occupation(self, counts: Mapping[str, int] | None = None, **kwargs: int) -> "FockBasisState":
        """Build a basis state, e.g. ``reg.occupation(c1=1, d2=1)``."""
        merged = dict(counts or {}, **kwargs)
        occ = [0] * len(self._names)
        for mode, n in merged.items():
            if int(n) != n or n < 0:
                raise ValueError(f"photon count for {mode!r} must be a non-negative integer, got {n!r}")
            occ[self.index(mode)] = int(n)
        return FockBasisState(self, tuple(occ))


STANDARD_REGISTRY = ModeRegistry(STANDARD_MODES)


@dataclass(frozen=True)
class FockBasisState:
    registry: ModeRegistry
    occupations: Occupation

    def __post_init__(self) -> None:
        if len(self.occupations) != len(self.registry):
            raise IncompatibleSpaceError("occupation vector length does not match registry")
        if any(n < 0 for n in self.occupations):
            raise ValueError("photon counts must be non-negative")

    def count(self, mode: str) -> int:
        return self.occupations[self.registry.index(mode)]

    @property
    def total(self) -> int:
        return sum(self.occupations)

    def as_dict(self) -> dict[str, int]:
        return {m: n for m, n in zip(self.registry.names, self.occupations) if n}

    def __repr__(self) -> str:
        body = ", ".join(f"{m}:{n}" for m, n in self.as_dict().items()) or "vac"
        return f"|{body}>"


def _pruned(amps: Mapping[Occupation, complex]) -> dict[Occupation, complex]:
    return {k: complex(v) for k, v in amps.items() if abs(v) >= PRUNE_THRESHOLD}


class PureState:
    """Superposition of Fock basis states.  Not necessarily normalized."""

    __slots__ = ("_registry", "_amps")

    def __init__(self, registry: ModeRegistry, amplitudes: Mapping[Occupation, complex]):
        n = len(registry)
        for occ in amplitudes:
            if len(occ) != n:
                raise IncompatibleSpaceError("occupation vector length does not match registry")
        self._registry = registry
        self._amps = MappingProxyType(_pruned(amplitudes))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[complex, FockBasisState]]) -> "PureState":
        """Linear combination ``sum(coef * |basis>)``; all bases must share one registry."""
        terms = list(terms)
        if not terms:
            raise ValueError("from_terms needs at least one term")
        registry = terms[0][1].registry
        amps: dict[Occupation, complex] = {}
        for coef, basis in terms:
            if basis.registry != registry:
                raise IncompatibleSpaceError("terms live in different mode registries")
            amps[basis.occupations] = amps.get(basis.occupations, 0j) + coef
        return cls(registry, amps)

    @property
    def registry(self) -> ModeRegistry:
        return self._registry

    @property
    def amplitudes(self) -> Mapping[Occupation, complex]:
        return self._amps

    def amplitude(self, basis: FockBasisState | Occupation) -> complex:
        occ = basis.occupations if isinstance(basis, FockBasisState) else tuple(basis)
        return self._amps.get(occ, 0j)

    def basis_states(self) -> list[FockBasisState]:
        return [FockBasisState(self._registry, occ) for occ in self._amps]

    def probabilities(self) -> dict[Occupation, float]:
        return {occ: abs(a) ** 2 for occ, a in self._amps.items()}

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    @property
    def is_zero(self) -> bool:
        return not self._amps

    def photon_numbers(self) -> set[int]:
        return {sum(occ) for occ in self._amps}

    def scaled(self, factor: complex) -> "PureState":
        return PureState(self._registry, {k: v * factor for k, v in self._amps.items()})

    def __add__(self, other: "PureState") -> "PureState":
        _require_same_space(self, other)
        amps = dict(self._amps)
        for k, v in other._amps.items():
            amps[k] = amps.get(k, 0j) + v
        return PureState(self._registry, amps)

    def __mul__(self, factor: complex) -> "PureState":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        terms = " + ".join(
            f"({a.real:.6g}{a.imag:+.6g}j){FockBasisState(self._registry, occ)!r}"
            for occ, a in sorted(self._amps.items(), reverse=True)
        )
        return f"PureState({terms or '0'})"


def _require_same_space(lhs: PureState | "MixedState", rhs: PureState | "MixedState") -> None:
    if lhs.registry != rhs.registry:
        raise IncompatibleSpaceError(
            f"states live in different mode registries: {lhs.registry.names} vs {rhs.registry.names}"
        )


def make_vacuum(registry: ModeRegistry | Iterable[str]) -> PureState:
    if not isinstance(registry, ModeRegistry):
        registry = ModeRegistry(registry)
    return PureState(registry, {(0,) * len(registry): 1.0 + 0j})


def zero_state(registry: ModeRegistry) -> PureState:
    return PureState(registry, {})


def basis_state(registry: ModeRegistry, **counts: int) -> PureState:
    """Unit-amplitude basis state, e.g. ``basis_state(reg, d2=1)``."""
    return PureState(registry, {registry.occupation(counts).occupations: 1.0 + 0j})


def create(state: PureState, mode: str) -> PureState:
    """Apply the creation operator of ``mode``; the result is not renormalized."""
    i = state.registry.index(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        n = occ[i]
        new = occ[:i] + (n + 1,) + occ[i + 1 :]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n + 1)
    return PureState(state.registry, out)


def annihilate(state: PureState, mode: str) -> PureState:
    i = state.registry.index(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        n = occ[i]
        if n == 0:
            continue
        new = occ[:i] + (n - 1,) + occ[i + 1 :]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n)
    return PureState(state.registry, out)


def inner_product(lhs: PureState, rhs: PureState) -> complex:
    """<lhs|rhs>, antilinear in ``lhs``."""
    _require_same_space(lhs, rhs)
    small, large = (lhs, rhs) if len(lhs.amplitudes) <= len(rhs.amplitudes) else (rhs, lhs)
    total = 0j
    for occ in small.amplitudes:
        if occ in large.amplitudes:
            total += lhs.amplitudes[occ].conjugate() * rhs.amplitudes[occ]
    return total


def normalize(state: PureState) -> PureState:
    norm = state.norm
    if norm < ALGEBRA_TOL:
        raise DegenerateStateError("cannot normalize a zero state")
    return state.scaled(1.0 / norm)


def states_equal_up_to_phase(lhs: PureState, rhs: PureState, tol: float = ALGEBRA_TOL) -> bool:
    """True if ``rhs == exp(i*phi) * lhs`` for some phase, within ``tol`` per amplitude."""
    _require_same_space(lhs, rhs)
    overlap = inner_product(lhs, rhs)
    phase = overlap / abs(overlap) if abs(overlap) > tol else 1.0
    keys = set(lhs.amplitudes) | set(rhs.amplitudes)
    return all(abs(lhs.amplitude(k) * phase - rhs.amplitude(k)) <= tol for k in keys)


def fix_global_phase(state: PureState, reference: FockBasisState | Occupation, phase: float) -> PureState:
    """Rotate the global phase so that the ``reference`` amplitude has argument ``phase``."""
    amp = state.amplitude(reference)
    if abs(amp) < ALGEBRA_TOL:
        return state
    return state.scaled(cmath.exp(1j * (phase - cmath.phase(amp))))


@dataclass(frozen=True)
class MixedState:
    """Weighted ensemble of normalized pure states."""

    ensemble: tuple[tuple[float, PureState], ...]
    registry: ModeRegistry = field(init=False)

    def __post_init__(self) -> None:
        if not self.ensemble:
            raise NormalizationError("a mixed state needs at least one member")
        registry = self.ensemble[0][1].registry
        for w, psi in self.ensemble:
            if psi.registry != registry:
                raise IncompatibleSpaceError("ensemble members live in different mode registries")
        total = sum(w for w, _ in self.ensemble)
        if abs(total - 1.0) > ALGEBRA_TOL:
            raise NormalizationError(f"ensemble weights sum to {total!r}, not 1")
        object.__setattr__(self, "registry", registry)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for w, _ in self.ensemble)

    @property
    def members(self) -> tuple[PureState, ...]:
        return tuple(psi for _, psi in self.ensemble)

    @property
    def trace(self) -> float:
        return sum(w * psi.norm**2 for w, psi in self.ensemble)

    def diagonal(self) -> dict[Occupation, float]:
        """Probability of every basis state carried by any member."""
        diag: dict[Occupation, float] = {}
        for w, psi in self.ensemble:
            for occ, p in psi.probabilities().items():
                diag[occ] = diag.get(occ, 0.0) + w * p
        return diag

    def map_members(self, fn) -> "MixedState":
        """Apply a linear, norm-preserving map to every member."""
        return MixedState(tuple((w, fn(psi)) for w, psi in self.ensemble))


def mix_ensemble(members: Sequence[tuple[float, PureState]]) -> MixedState:
    members = list(members)
    if not members:
        raise NormalizationError("empty ensemble")
    weights = [float(w) for w, _ in members]
    if any(w < 0 or w > 1 + WEIGHT_TOL for w in weights):
        raise NormalizationError(f"weights must lie in [0, 1], got {weights}")
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise NormalizationError(f"weights sum to {total!r}, expected 1")
    for _, psi in members:
        if abs(psi.norm - 1.0) > WEIGHT_TOL:
            raise NormalizationError(f"ensemble member has norm {psi.norm!r}; normalize it first")
    # Absorb the input rounding so the stored invariant holds at ALGEBRA_TOL.
    return MixedState(tuple((w / total, normalize(psi)) for w, (_, psi) in zip(weights, members)))


def _number_expectation_pure(state: PureState, idx: Sequence[int]) -> float:
    value = 0.0
    for occ, amp in state.amplitudes.items():
        prod = 1
        for i in idx:
            prod *= occ[i]
        value += prod * abs(amp) ** 2
    return value


def number_expectation(state: PureState | MixedState, *modes: str) -> float:
    """<N_i> or <N_i N_j> (the number operators commute, so order is irrelevant)."""
    if len(modes) not in (1, 2):
        raise ValueError("number_expectation takes one or two modes")
    idx = [state.registry.index(m) for m in modes]
    if isinstance(state, MixedState):
        return sum(w * _number_expectation_pure(psi, idx) for w, psi in state.ensemble)
    return _number_expectation_pure(state, idx)


def density_matrix_element(rho: MixedState | PureState, bra: FockBasisState, ket: FockBasisState) -> complex:
    """<bra| rho |ket> = sum_k w_k <bra|psi_k><psi_k|ket>."""
    if isinstance(rho, PureState):
        rho = MixedState(((1.0, rho),))
    if bra.registry != rho.registry or ket.registry != rho.registry:
        raise IncompatibleSpaceError("basis states and density matrix use different registries")
    return sum(
        (w * psi.amplitude(bra) * psi.amplitude(ket).conjugate() for w, psi in rho.ensemble),
        0j,
    )


def dense_density_matrix(rho: MixedState, basis: Sequence[Occupation]) -> np.ndarray:
    """Dense matrix of ``rho`` restricted to an explicit list of basis occupations."""
    index = {occ: i for i, occ in enumerate(basis)}
    mat = np.zeros((len(basis), len(basis)), dtype=complex)
    for w, psi in rho.ensemble:
        vec = np.zeros(len(basis), dtype=complex)
        for occ, amp in psi.amplitudes.items():
            vec[index[occ]] = amp
        mat += w * np.outer(vec, vec.conj())
    return mat
