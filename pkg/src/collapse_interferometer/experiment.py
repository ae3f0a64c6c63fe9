"""Measurement layer: exact outcome tables, seeded Monte Carlo trials,
post-selection, correlation estimators, delay sweeps and jump detection.

Detectors are number-resolving and lossless, so every trial ends with two
photons distributed over (c1, c2, d1, d2).  The left detectors always fire
no later than the right ones; the left outcome is therefore drawn first
from the joint state and the partner photon is resolved by the collapse
semantics.

Random numbers come from a Philox counter-based generator keyed by the run
seed.  Trial ``i`` consumes exactly the ``i``-th block of four uniforms, so
any single trial can be regenerated in isolation (:func:`trial_uniforms`)
and the whole batch is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .collapse import (
    CollapseSemantics,
    Coherent,
    PositionalFiniteDuration,
    PositionalInstant,
    detection_probabilities,
    evolve_upstream_mixture_through_D,
    positional_collapse_upstream,
    project_on_first_detection,
    upstream_probability,
)
from .errors import GridError, InsufficientStatisticsError, VariantError
from .interferometer import (
    DETECTORS,
    LEFT_DETECTORS,
    InterferometerSpec,
    passage_times,
    propagate_full,
)

Pair = tuple[str, str]
Config = tuple[int, int, int, int]  # photon counts at (c1, c2, d1, d2)

UNIFORMS_PER_TRIAL = 4
_COL = {d: i for i, d in enumerate(DETECTORS)}

SWEEP_PAIRS: tuple[Pair, ...] = (("c1", "d2"), ("c1", "d1"))
DEFAULT_JUMP_THRESHOLD = 0.3
JUMP_SIGMA_GATE = 5.0


# -- post-selection predicates --------------------------------------------

def _c1_single_and_right_single(counts: np.ndarray) -> np.ndarray:
    return (counts[:, 0] == 1) & (counts[:, 2] + counts[:, 3] == 1)


def _c2_single_and_right_single(counts: np.ndarray) -> np.ndarray:
    return (counts[:, 1] == 1) & (counts[:, 2] + counts[:, 3] == 1)


def _any_left_right_coincidence(counts: np.ndarray) -> np.ndarray:
    return (counts[:, 0] + counts[:, 1] >= 1) & (counts[:, 2] + counts[:, 3] >= 1)


PREDICATES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "c1_single_and_right_single": _c1_single_and_right_single,
    "c2_single_and_right_single": _c2_single_and_right_single,
    "any_left_right_coincidence": _any_left_right_coincidence,
}
DEFAULT_PREDICATE = "c1_single_and_right_single"

PredicateLike = Union[str, Callable[[np.ndarray], np.ndarray]]


def _resolve_predicate(predicate: PredicateLike) -> Callable[[np.ndarray], np.ndarray]:
    if callable(predicate):
        return predicate
    try:
        return PREDICATES[predicate]
    except KeyError:
        raise KeyError(f"unknown predicate {predicate!r}; choose from {sorted(PREDICATES)}") from None


def default_predicate_for(anchor: str) -> str:
    return {"c1": "c1_single_and_right_single", "c2": "c2_single_and_right_single"}.get(
        anchor, "any_left_right_coincidence"
    )


# -- conditional outcome structure ------------------------------------------

def _pick(occ: tuple[int, ...], idx: Sequence[int]) -> tuple[int, int]:
    return occ[idx[0]], occ[idx[1]]


@dataclass(frozen=True)
class _Categorical:
    outcomes: tuple
    probs: np.ndarray

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "_Categorical":
        keys = tuple(sorted(mapping))
        p = np.array([mapping[k] for k in keys], dtype=float)
        return cls(keys, p / p.sum())

    def sample_index(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return np.minimum(np.searchsorted(cum, u, side="right"), len(self.probs) - 1)


@dataclass(frozen=True)
class OutcomeModel:
    """The two-stage law of one trial for a fixed (spec, semantics)."""

    spec: InterferometerSpec
    model: CollapseSemantics
    left: _Categorical                         # over (c1, c2) configurations
    right_given_left: Mapping[tuple[int, int], _Categorical]
    projected: Mapping[str, _Categorical]      # partner law, downstream branch
    mixed: Mapping[str, _Categorical]          # partner law, upstream branch
    p_upstream: float


def build_outcome_model(spec: InterferometerSpec, model: CollapseSemantics) -> OutcomeModel:
    joint = propagate_full(spec)
    reg = joint.registry
    li = [reg.index(m) for m in LEFT_DETECTORS]
    ri = [reg.index(m) for m in ("d1", "d2")]

    left: dict[tuple[int, int], float] = {}
    right: dict[tuple[int, int], dict[tuple[int, int], float]] = {}
    for occ, p in joint.probabilities().items():
        lc = _pick(occ, li)
        left[lc] = left.get(lc, 0.0) + p
        bucket = right.setdefault(lc, {})
        rc = _pick(occ, ri)
        bucket[rc] = bucket.get(rc, 0.0) + p

    projected, mixed = {}, {}
    for det in LEFT_DETECTORS:
        lc = (1, 0) if det == "c1" else (0, 1)
        if lc not in left:
            continue
        proj = detection_probabilities(project_on_first_detection(joint, det))
        projected[det] = _Categorical.from_mapping({(1, 0): proj["d1"], (0, 1): proj["d2"]})
        rho = positional_collapse_upstream(det)
        rho = evolve_upstream_mixture_through_D(rho, spec.splitters["D"], dict(spec.leg_phases))
        mix = detection_probabilities(rho)
        mixed[det] = _Categorical.from_mapping({(1, 0): mix["d1"], (0, 1): mix["d2"]})

    return OutcomeModel(
        spec=spec,
        model=model,
        left=_Categorical.from_mapping(left),
        right_given_left={lc: _Categorical.from_mapping(b) for lc, b in right.items()},
        projected=projected,
        mixed=mixed,
        p_upstream=upstream_probability(spec, model),
    )


def _single_left_detector(lc: tuple[int, int]) -> Optional[str]:
    return {(1, 0): "c1", (0, 1): "c2"}.get(lc)


def all_two_photon_configs() -> list[Config]:
    configs = []
    for i in range(4):
        for j in range(i, 4):
            occ = [0, 0, 0, 0]
            occ[i] += 1
            occ[j] += 1
            configs.append(tuple(occ))
    return sorted(configs, reverse=True)


def exact_outcome_table(spec: InterferometerSpec, model: CollapseSemantics) -> dict[Config, float]:
    """Probability of every final (c1, c2, d1, d2) configuration, zeros included."""
    om = build_outcome_model(spec, model)
    table = {cfg: 0.0 for cfg in all_two_photon_configs()}
    for lc, pl in zip(om.left.outcomes, om.left.probs):
        det = _single_left_detector(lc)
        if det is None:
            law = {rc: p for rc, p in zip(om.right_given_left[lc].outcomes, om.right_given_left[lc].probs)}
        else:
            law = {}
            for cat, w in ((om.mixed[det], om.p_upstream), (om.projected[det], 1.0 - om.p_upstream)):
                for rc, p in zip(cat.outcomes, cat.probs):
                    law[rc] = law.get(rc, 0.0) + w * p
        for rc, p in law.items():
            table[lc + rc] += pl * p
    return table


# -- trials -------------------------------------------------------------------

def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 2**128:
        raise ValueError(f"seed must be in [0, 2**128), got {seed}")
    return seed


def trial_uniforms(seed: int, trial_index: int) -> np.ndarray:
    """The four uniforms that drive trial ``trial_index`` of a run seeded with ``seed``."""
    bitgen = np.random.Philox(key=_check_seed(seed))
    bitgen.advance(int(trial_index))
    return np.random.Generator(bitgen).random(UNIFORMS_PER_TRIAL)


def _batch_uniforms(seed: int, n: int) -> np.ndarray:
    return np.random.Generator(np.random.Philox(key=_check_seed(seed))).random((n, UNIFORMS_PER_TRIAL))


@dataclass(frozen=True)
class TrialOutcome:
    counts: dict[str, int]
    timestamps: dict[str, float]
    trial_index: int
    collapse_time: Optional[float] = None


class Trials(Sequence[TrialOutcome]):
    """Column-oriented batch of trial outcomes.

    Indexing with an integer yields a :class:`TrialOutcome`; slicing or a
    boolean mask yields another :class:`Trials`, order preserved.
    """

    def __init__(
        self,
        counts: np.ndarray,
        trial_index: np.ndarray,
        collapse_time: np.ndarray,
        arrivals: Mapping[str, float],
    ):
        self.counts = np.asarray(counts, dtype=np.int8).reshape(-1, 4)
        self.trial_index = np.asarray(trial_index, dtype=np.int64)
        self.collapse_time = np.asarray(collapse_time, dtype=float)
        self.arrivals = dict(arrivals)

    def __len__(self) -> int:
        return len(self.trial_index)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            row = self.counts[key]
            ct = float(self.collapse_time[key])
            return TrialOutcome(
                counts={d: int(row[_COL[d]]) for d in DETECTORS},
                timestamps={d: self.arrivals[d] for d in DETECTORS if row[_COL[d]]},
                trial_index=int(self.trial_index[key]),
                collapse_time=None if math.isnan(ct) else ct,
            )
        return Trials(self.counts[key], self.trial_index[key], self.collapse_time[key], self.arrivals)

    def __iter__(self) -> Iterator[TrialOutcome]:
        for i in range(len(self)):
            yield self[i]

    @property
    def timestamps(self) -> np.ndarray:
        """(n, 4) arrival times, NaN where a detector stayed dark."""
        times = np.array([self.arrivals[d] for d in DETECTORS])
        return np.where(self.counts > 0, times, np.nan)

    def indicator(self, detector: str) -> np.ndarray:
        return self.counts[:, _COL[detector]] > 0


def run_trials(spec: InterferometerSpec, model: CollapseSemantics, n: int, seed: int) -> Trials:
    if n <= 0:
        raise ValueError(f"number of trials must be positive, got {n}")
    om = build_outcome_model(spec, model)
    timing = passage_times(spec)
    u = _batch_uniforms(seed, n)

    left_idx = om.left.sample_index(u[:, 0])
    counts = np.zeros((n, 4), dtype=np.int8)
    collapse_time = np.full(n, np.nan)

    for k, lc in enumerate(om.left.outcomes):
        rows = np.flatnonzero(left_idx == k)
        if rows.size == 0:
            continue
        counts[rows, 0], counts[rows, 1] = lc
        det = _single_left_detector(lc)
        if det is None:
            cat = om.right_given_left[lc]
            rc = np.array(cat.outcomes)[cat.sample_index(u[rows, 2])]
            counts[rows, 2:] = rc
            continue

        if isinstance(model, PositionalFiniteDuration):
            offsets = model.collapse_times(timing.left_offset, u[rows, 1])
            upstream = offsets <= timing.d_passage_offset
            collapse_time[rows] = timing.reference + offsets
        elif isinstance(model, PositionalInstant):
            upstream = np.full(rows.size, om.p_upstream == 1.0)
        elif isinstance(model, Coherent):
            upstream = np.zeros(rows.size, dtype=bool)
        else:
            raise VariantError(f"unknown collapse semantics {model!r}")

        for cat, mask in ((om.mixed[det], upstream), (om.projected[det], ~upstream)):
            sub = rows[mask]
            if sub.size:
                counts[sub, 2:] = np.array(cat.outcomes)[cat.sample_index(u[sub, 2])]

    return Trials(counts, np.arange(n), collapse_time, timing.arrivals)


def post_select(trials: Trials, predicate: PredicateLike = DEFAULT_PREDICATE) -> Trials:
    return trials[_resolve_predicate(predicate)(trials.counts)]


# -- estimators -------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationReport:
    pair: Pair
    estimator_kind: str
    value: float
    standard_error: float
    n_trials: int
    n_postselected: int

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "estimator_kind": self.estimator_kind,
            "value": self.value,
            "standard_error": self.standard_error,
            "n_trials": self.n_trials,
            "n_postselected": self.n_postselected,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorrelationReport":
        return cls(
            pair=tuple(d["pair"]),
            estimator_kind=d["estimator_kind"],
            value=float(d["value"]),
            standard_error=float(d["standard_error"]),
            n_trials=int(d["n_trials"]),
            n_postselected=int(d["n_postselected"]),
        )


def binomial_standard_error(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else float("nan")


def correlation_estimate(
    trials: Trials,
    pair: Pair,
    kind: str = "conditional",
    predicate: PredicateLike | None = None,
) -> CorrelationReport:
    """corr(D_j, D_j') from trials.

    ``joint``: mean of D_j * D_j' over every trial.
    ``conditional``: mean of D_j' over post-selected trials with D_j = 1;
    the predicate defaults to the single-photon one anchored at ``j``.
    """
    j, jp = pair
    for d in pair:
        if d not in _COL:
            raise KeyError(f"unknown detector {d!r}")
    n = len(trials)
    if kind == "joint":
        if n == 0:
            raise InsufficientStatisticsError("no trials to estimate from", n=0)
        v = float(np.mean(trials.indicator(j) & trials.indicator(jp)))
        return CorrelationReport(pair, kind, v, binomial_standard_error(v, n), n, n)
    if kind != "conditional":
        raise ValueError(f"estimator kind must be 'joint' or 'conditional', got {kind!r}")

    selected = post_select(trials, predicate or default_predicate_for(j))
    anchored = selected[selected.indicator(j)]
    m = len(anchored)
    if m == 0:
        raise InsufficientStatisticsError(f"no post-selected trials with {j} firing", n=0)
    v = float(np.mean(anchored.indicator(jp)))
    return CorrelationReport(pair, kind, v, binomial_standard_error(v, m), n, m)


def exact_correlation(
    table: Mapping[Config, float],
    pair: Pair,
    kind: str = "conditional",
    predicate: PredicateLike | None = None,
) -> float:
    """The population value that :func:`correlation_estimate` converges to."""
    configs = np.array(list(table), dtype=np.int8).reshape(-1, 4)
    probs = np.array(list(table.values()), dtype=float)
    fires = configs > 0
    j, jp = _COL[pair[0]], _COL[pair[1]]
    if kind == "joint":
        return float(probs[fires[:, j] & fires[:, jp]].sum())
    mask = _resolve_predicate(predicate or default_predicate_for(pair[0]))(configs) & fires[:, j]
    denom = probs[mask].sum()
    if denom <= 0:
        raise InsufficientStatisticsError(f"post-selection with {pair[0]} firing has zero probability", n=0)
    return float(probs[mask & fires[:, jp]].sum() / denom)


# -- sweeps and jump detection ------------------------------------------------

def pair_key(pair: Pair) -> str:
    return f"{pair[0]}_{pair[1]}"


@dataclass(frozen=True)
class Jump:
    location: float
    left: float
    right: float
    pair: Pair = ("c1", "d1")

    @property
    def magnitude(self) -> float:
        return abs(self.right - self.left)

    def to_dict(self) -> dict:
        return {"location": self.location, "left": self.left, "right": self.right, "pair": list(self.pair)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Jump":
        return cls(float(d["location"]), float(d["left"]), float(d["right"]), tuple(d["pair"]))


@dataclass(frozen=True)
class SweepCurve:
    grid: tuple[float, ...]
    reports: Mapping[str, tuple[CorrelationReport, ...]]
    exact: Mapping[str, tuple[float, ...]]
    jump: Optional[Jump] = None
    threshold: float = DEFAULT_JUMP_THRESHOLD

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise GridError("sweep grid must be strictly increasing")
        if self.jump is not None and not self.grid[0] <= self.jump.location <= self.grid[-1]:
            raise GridError("jump location lies outside the grid span")

    def values(self, pair: Pair) -> np.ndarray:
        return np.array([r.value for r in self.reports[pair_key(pair)]])

    def standard_errors(self, pair: Pair) -> np.ndarray:
        return np.array([r.standard_error for r in self.reports[pair_key(pair)]])

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "reports": {k: [r.to_dict() for r in v] for k, v in self.reports.items()},
            "exact": {k: list(v) for k, v in self.exact.items()},
            "jump": self.jump.to_dict() if self.jump else None,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepCurve":
        return cls(
            grid=tuple(float(x) for x in d["grid"]),
            reports={k: tuple(CorrelationReport.from_dict(r) for r in v) for k, v in d["reports"].items()},
            exact={k: tuple(float(x) for x in v) for k, v in d["exact"].items()},
            jump=Jump.from_dict(d["jump"]) if d.get("jump") else None,
            threshold=float(d.get("threshold", DEFAULT_JUMP_THRESHOLD)),
        )


def _check_grid(grid: Sequence[float], minimum: int = 1) -> tuple[float, ...]:
    grid = tuple(float(t) for t in grid)
    if len(grid) < minimum:
        raise GridError(f"grid needs at least {minimum} points, got {len(grid)}")
    if any(not math.isfinite(t) or t < 0 for t in grid):
        raise GridError("grid values must be finite and >= 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise GridError("grid must be strictly increasing")
    return grid


def sweep_tau(
    template: InterferometerSpec,
    model: CollapseSemantics,
    grid: Sequence[float],
    n: int,
    seed: int,
    threshold: float = DEFAULT_JUMP_THRESHOLD,
    predicate: PredicateLike | None = None,
) -> SweepCurve:
    """Conditional (c1, d2) and (c1, d1) correlations along a delay grid.

    Every grid point reuses the same seed (common random numbers), so the
    curves differ between points only through the delay.
    """
    grid = _check_grid(grid)
    reports: dict[str, list[CorrelationReport]] = {pair_key(p): [] for p in SWEEP_PAIRS}
    exact: dict[str, list[float]] = {pair_key(p): [] for p in SWEEP_PAIRS}
    for tau in grid:
        spec = template.with_tau(tau)
        trials = run_trials(spec, model, n, seed)
        table = exact_outcome_table(spec, model)
        for p in SWEEP_PAIRS:
            reports[pair_key(p)].append(correlation_estimate(trials, p, "conditional", predicate))
            exact[pair_key(p)].append(exact_correlation(table, p, "conditional", predicate))
    curve = SweepCurve(
        grid=grid,
        reports={k: tuple(v) for k, v in reports.items()},
        exact={k: tuple(v) for k, v in exact.items()},
        threshold=threshold,
    )
    if len(grid) >= 3:
        curve = SweepCurve(curve.grid, curve.reports, curve.exact, detect_jump(curve, threshold), threshold)
    return curve


def detect_jump(curve: SweepCurve, threshold: float, pair: Pair = ("c1", "d1")) -> Optional[Jump]:
    """Largest adjacent step above ``threshold`` and 5 pooled standard errors."""
    if len(curve.grid) < 3:
        raise GridError("jump detection needs at least 3 grid points")
    v = curve.values(pair)
    se = curve.standard_errors(pair)
    steps = np.abs(np.diff(v))
    pooled = np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
    ok = (steps > threshold) & (steps > JUMP_SIGMA_GATE * pooled)
    if not ok.any():
        return None
    i = int(np.argmax(np.where(ok, steps, -np.inf)))
    location = 0.5 * (curve.grid[i] + curve.grid[i + 1])
    return Jump(location=location, left=float(v[i]), right=float(v[i + 1]), pair=tuple(pair))


def count_reduction_curve(
    template: InterferometerSpec,
    window: float,
    distribution,
    anchoring,
    grid: Sequence[float],
    n: int,
    seed: int,
) -> list[tuple[float, float]]:
    """Post-selected d2 counts under a finite detector window, relative to
    the projection (no-collapse-before-D) behavior, along a delay grid.

    Both runs at each delay share the seed, so the post-selected samples
    coincide and the ratio isolates the effect of the window.
    """
    grid = _check_grid(grid)
    threshold = template.detector_delay
    slack = 1e-12 * max(1.0, threshold + window)
    if grid[0] < threshold - window - slack or grid[-1] > threshold + window + slack:
        raise GridError(f"grid must lie within [l/c - window, l/c + window] = "
                        f"[{threshold - window}, {threshold + window}]")
    model = PositionalFiniteDuration(window, distribution, anchoring)
    baseline = Coherent()
    d2 = _COL["d2"]
    curve = []
    for tau in grid:
        spec = template.with_tau(tau)
        fd = post_select(run_trials(spec, model, n, seed))
        base = post_select(run_trials(spec, baseline, n, seed))
        base_count = int((base.counts[:, d2] > 0).sum())
        if base_count == 0:
            raise InsufficientStatisticsError("no post-selected d2 counts in the baseline run", n=0)
        curve.append((tau, int((fd.counts[:, d2] > 0).sum()) / base_count))
    return curve


def exact_count_reduction(
    template: InterferometerSpec, window: float, distribution, anchoring, grid: Sequence[float]
) -> list[tuple[float, float]]:
    model = PositionalFiniteDuration(window, distribution, anchoring)
    out = []
    for tau in _check_grid(grid):
        spec = template.with_tau(tau)
        fd = exact_correlation(exact_outcome_table(spec, model), ("c1", "d2"))
        base = exact_correlation(exact_outcome_table(spec, Coherent()), ("c1", "d2"))
        out.append((tau, fd / base))
    return out
