"""
Measurement-only entanglement witness for pure-dephasing qudits.

Protocol: hold the system in pointer state ``|k>`` for a preparation time
``tau`` (the environment evolves to ``R_kk(tau)``), then excite a test
superposition and record each coherence

    rho_ij^(k)(tau, t) = c_i c_j^* Tr( w_i(t) R_kk(tau) w_j(t)^dagger ).

If two preparations ``k`` and ``q`` give different coherence evolutions,
``R_kk(tau) != R_qq(tau)`` and any superposition involving ``|k>`` and
``|q>`` is entangled with the environment at ``tau``. A silent witness
certifies nothing: commuting conditional propagators and class-two-only
entanglement both leave the coherences untouched.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InsufficientPrepStates
from .model import PureDephasingModel, SystemAmplitudes, as_amplitudes

DEFAULT_THRESHOLD = 1e-6
BOUND_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    tau: float
    prep_states: tuple
    time_grid: np.ndarray
    test_amplitudes: SystemAmplitudes | None = None
    firing_threshold: float = DEFAULT_THRESHOLD
    pairs: tuple | None = None

    def __post_init__(self):
        preps = tuple(int(k) for k in self.prep_states)
        if len(set(preps)) != len(preps):
            raise ValueError(f"preparation states must be distinct: {preps}")
        grid = np.array(self.time_grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise ValueError("time grid is empty")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("time grid must be non-negative and strictly increasing")
        grid.setflags(write=False)
        object.__setattr__(self, "prep_states", preps)
        object.__setattr__(self, "time_grid", grid)
        if self.pairs is not None:
            object.__setattr__(self, "pairs", tuple(tuple(int(x) for x in p) for p in self.pairs))

    def validate(self, n: int) -> SystemAmplitudes:
        for k in self.prep_states:
            if not 0 <= k < n:
                raise DimensionMismatch(f"preparation state {k} outside [0, {n})")
        for i, j in self.coherence_pairs(n):
            if not (0 <= i < j < n):
                raise DimensionMismatch(f"coherence pair {(i, j)} invalid for {n} levels")
        return as_amplitudes(self.test_amplitudes, n)

    def coherence_pairs(self, n: int):
        if self.pairs is not None:
            return list(self.pairs)
        return list(itertools.combinations(range(n), 2))


@dataclass(frozen=True, eq=False)
class CoherenceTrace:
    pair: tuple
    prep: int
    times: np.ndarray
    values: np.ndarray


@dataclass(eq=False)
class WitnessReport:
    """Outcome of a witness scan.

    ``diffs`` maps ``((k, q), (i, j))`` to the maximum over the grid of
    ``|rho_ij^(k) - rho_ij^(q)|``.
    """

    traces: list
    diffs: dict
    threshold: float
    fired_pairs: set = field(default_factory=set)
    implied_entangled: set = field(default_factory=set)
    prep_distances: dict = field(default_factory=dict)

    def trace(self, prep: int, pair) -> CoherenceTrace:
        for tr in self.traces:
            if tr.prep == prep and tr.pair == tuple(pair):
                return tr
        raise KeyError((prep, pair))

    def difference(self, k: int, q: int, pair) -> np.ndarray:
        return self.trace(k, pair).values - self.trace(q, pair).values

    @property
    def fired(self) -> bool:
        return bool(self.fired_pairs)

    @property
    def max_diff(self) -> float:
        return max(self.diffs.values(), default=0.0)


def _check_bound(values, amps, i, j):
    bound = abs(amps.c[i]) * abs(amps.c[j])
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if worst > bound + BOUND_ATOL:
        raise ArithmeticError(f"coherence ({i},{j}) exceeds damping bound: {worst} > {bound}")


def prepared_trace(model: PureDephasingModel, r0, prep: int, tau: float, pair, grid,
                   c=None, include_free_phase: bool = False) -> CoherenceTrace:
    """Coherence ``rho_ij^(prep)(tau, t)`` over ``grid`` after preparation in ``|prep>``."""
    amps = as_amplitudes(c, model.n_sys)
    i, j = (model.check_index(x) for x in pair)
    k = model.check_index(prep)
    r0 = linalg.check_density(r0, "r0")
    if r0.shape[0] != model.dim_env:
        raise DimensionMismatch("r0 does not match the environment dimension")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    wk = model.propagator(k, tau, include_free_phase)
    prepared = wk @ r0 @ linalg.adjoint(wk)
    wi = model.propagator(i, grid, include_free_phase)
    wj = model.propagator(j, grid, include_free_phase)
    traces = np.einsum("tab,bc,tac->t", wi, prepared, np.conj(wj))
    values = amps.c[i] * np.conj(amps.c[j]) * traces
    _check_bound(values, amps, i, j)
    values.setflags(write=False)
    return CoherenceTrace((i, j), k, grid, values)


def build_report(traces, prep_states, pairs, threshold: float) -> WitnessReport:
    """Compare traces of every preparation pair and fire above ``threshold``."""
    by_key = {(tr.prep, tr.pair): tr.values for tr in traces}
    diffs = {}
    fired = set()
    for k, q in itertools.combinations(prep_states, 2):
        for p in pairs:
            delta = by_key[(k, p)] - by_key[(q, p)]
            m = float(np.max(np.abs(delta)))
            diffs[((k, q), p)] = m
            if m > threshold:
                fired.add((min(k, q), max(k, q)))
    return WitnessReport(
        traces=list(traces),
        diffs=diffs,
        threshold=threshold,
        fired_pairs=fired,
        implied_entangled=implied_pairs_closure(fired),
    )


def witness_scan(model: PureDephasingModel, r0, cfg: ProtocolConfig,
                 include_free_phase: bool = False) -> WitnessReport:
    if len(cfg.prep_states) < 2:
        raise InsufficientPrepStates("the witness compares at least two preparations")
    amps = cfg.validate(model.n_sys)
    pairs = cfg.coherence_pairs(model.n_sys)
    traces = [
        prepared_trace(model, r0, k, cfg.tau, p, cfg.time_grid, amps, include_free_phase)
        for k in cfg.prep_states
        for p in pairs
    ]
    report = build_report(traces, cfg.prep_states, pairs, cfg.firing_threshold)

    # soundness: a fired pair must have distinct prepared environments
    r0 = np.asarray(r0, dtype=complex)
    prepared = {}
    for k in cfg.prep_states:
        w = model.propagator(k, cfg.tau)
        prepared[k] = w @ r0 @ linalg.adjoint(w)
    for k, q in sorted(report.fired_pairs):
        dist = linalg.frobenius(prepared[k] - prepared[q])
        report.prep_distances[(k, q)] = dist
        if dist == 0.0:
            raise ArithmeticError(f"pair {(k, q)} fired with identical prepared environments")
    return report


def implied_pairs_closure(fired) -> set:
    """All pointer pairs linked through the fired-pair graph.

    Fired ``(k, l)`` and ``(k, l')`` imply ``(l, l')``; iterating to a
    fixpoint connects every pair inside a connected component.
    """
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in fired:
        if a == b:
            continue
        parent[find(a)] = find(b)
    groups = {}
    for x in list(parent):
        groups.setdefault(find(x), []).append(x)
    out = set()
    for members in groups.values():
        out.update(itertools.combinations(sorted(members), 2))
    return out


@dataclass(frozen=True)
class UndetectabilityReport:
    all_commuting: bool
    commuting_pairs: list
    max_norms: dict


def undetectability_analysis(model: PureDephasingModel, grid, tol: float = 1e-8) -> UndetectabilityReport:
    """Flag pointer pairs whose conditional propagators commute on the whole grid."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    w = [model.propagator(k, grid) for k in range(model.n_sys)]
    norms = {}
    for k, l in itertools.combinations(range(model.n_sys), 2):
        comm = w[k] @ w[l] - w[l] @ w[k]
        norms[(k, l)] = float(np.max(np.linalg.norm(comm, axis=(-2, -1)), initial=0.0))
    commuting = [p for p, v in norms.items() if v <= tol]
    return UndetectabilityReport(len(commuting) == len(norms), commuting, norms)
