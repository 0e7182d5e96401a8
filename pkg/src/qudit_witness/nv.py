"""
NV-center spin qutrit coupled to a bath of 13C nuclear spins.

Pointer states are the electron spin projections ``m = -1, 0, +1``, stored
at indices ``0, 1, 2``. The environment Hamiltonian is the nuclear Zeeman
term ``sum_j omega_n I^z_j`` with ``omega_n = gamma_n B_z``; the pointer
couplings are ``V_0 = 0``, ``V_{+-1} = +-V`` with

    V = sum_j (A^{zx}_j I^x_j + A^{zy}_j I^y_j + A^{zz}_j I^z_j).

Every conditional propagator and the polarized bath state factor over
spins, so coherences, class-one distances and class-two commutators are
evaluated as products of 2x2 quantities at a cost linear (or quadratic)
in the number of spins. The dense path builds ``2**n``-dimensional
operators and is limited by the dense cap.

Units: time in microseconds, couplings and frequencies in rad/us,
field in tesla, gyromagnetic ratios in MHz/T (converted with a 2*pi).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import reduce
from importlib import resources

import numpy as np
from scipy import constants

from . import linalg
from .criteria import CriteriaReport, class_one_pairs, class_two_quadruples
from .errors import (
    DenseCapExceeded,
    IndexOutOfRange,
    InsufficientPrepStates,
    InvalidRange,
    ParseError,
    PolarizationOutOfRange,
    TooClose,
)
from .files import atomic_write_text
from .model import PureDephasingModel, as_amplitudes
from .witness import CoherenceTrace, ProtocolConfig, build_report

BRANCHES = (-1, 0, 1)
LABELS = BRANCHES

GAMMA_E_PRINTED = 28.08  # MHz/T as quoted with the model; physical value is in GHz/T
GAMMA_E_PHYSICAL = 28.08e3  # MHz/T
GAMMA_N_C13 = 10.71  # MHz/T
ZERO_FIELD_SPLITTING = 2870.0  # MHz
MIN_DISTANCE_NM = 0.1

TABLE_COLUMNS = ("r_nm", "a_zx", "a_zy", "a_zz", "p")

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
ID2 = np.eye(2, dtype=complex)


def mhz_to_rad_per_us(f):
    return 2 * np.pi * f


def branch_index(branch: int) -> int:
    if branch not in BRANCHES:
        raise IndexOutOfRange(f"branch {branch} not in {BRANCHES}")
    return BRANCHES.index(branch)


def index_branch(k: int) -> int:
    return BRANCHES[k]


@dataclass(frozen=True)
class NuclearSpin:
    a_zx: float
    a_zy: float
    a_zz: float
    p: float = 0.0
    position: tuple | None = None
    r_nm: float | None = None

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a_zx, self.a_zy, self.a_zz)):
            raise ValueError("couplings must be finite")
        if not -1.0 <= self.p <= 1.0:
            raise PolarizationOutOfRange(f"polarization {self.p} outside [-1, 1]")
        if self.position is not None:
            pos = tuple(float(x) for x in self.position)
            object.__setattr__(self, "position", pos)
            if self.r_nm is None:
                object.__setattr__(self, "r_nm", math.sqrt(sum(x * x for x in pos)))

    @property
    def coupling(self) -> np.ndarray:
        return np.array([self.a_zx, self.a_zy, self.a_zz])

    def with_polarization(self, p: float) -> "NuclearSpin":
        return NuclearSpin(self.a_zx, self.a_zy, self.a_zz, p, self.position, self.r_nm)


@dataclass(frozen=True)
class NvConfig:
    """NV-center demonstration parameters.

    ``gamma_e`` defaults to the value printed alongside the model (28.08,
    nominally MHz/T); it only enters the pointer energies, which matter
    only when ``include_free_phases`` is set.
    """

    spins: tuple
    b_z: float = 0.02
    gamma_e: float = GAMMA_E_PRINTED
    gamma_n: float = GAMMA_N_C13
    delta: float = ZERO_FIELD_SPLITTING
    include_free_phases: bool = False
    dense_cap: int = linalg.DEFAULT_DENSE_CAP

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        if self.b_z < 0:
            raise ValueError("b_z must be non-negative")
        if not self.spins:
            raise ValueError("at least one nuclear spin is required")

    @property
    def omega_n(self) -> float:
        """Nuclear Larmor frequency in rad/us."""
        return float(mhz_to_rad_per_us(self.gamma_n) * self.b_z)

    @property
    def epsilons(self) -> np.ndarray:
        """Pointer energies in rad/us, ordered ``(-1, 0, +1)``."""
        split = self.gamma_e * self.b_z
        return mhz_to_rad_per_us(np.array([self.delta - split, 0.0, self.delta + split]))

    def with_polarization(self, p: float) -> "NvConfig":
        spins = tuple(s.with_polarization(p) for s in self.spins)
        return NvConfig(spins, self.b_z, self.gamma_e, self.gamma_n, self.delta,
                        self.include_free_phases, self.dense_cap)


def dipolar_couplings(r_vec, gamma_e: float = GAMMA_E_PHYSICAL,
                      gamma_n: float = GAMMA_N_C13):
    """Secular dipolar couplings ``(A^{zx}, A^{zy}, A^{zz})`` in rad/us.

    ``r_vec`` is the nucleus position in nm relative to the defect; gyromagnetic
    ratios are in MHz/T.
    """
    r = np.asarray(r_vec, dtype=float).reshape(3)
    dist = float(np.linalg.norm(r))
    if dist <= MIN_DISTANCE_NM:
        raise TooClose(f"|r| = {dist} nm is inside the contact regime (<= {MIN_DISTANCE_NM} nm)")
    ge = mhz_to_rad_per_us(gamma_e) * 1e6  # rad/s/T
    gn = mhz_to_rad_per_us(gamma_n) * 1e6
    r_m = dist * 1e-9
    scale = constants.mu_0 / (4 * np.pi) * ge * gn * constants.hbar / r_m**3  # rad/s
    scale *= 1e-6
    unit = r / dist
    tensor = np.array([0.0, 0.0, 1.0]) - 3 * unit * unit[2]
    return tuple(float(x) for x in scale * tensor)


def _generator_field(spin: NuclearSpin, branch: int, omega_n: float) -> np.ndarray:
    return np.array([0.0, 0.0, omega_n]) + branch * spin.coupling


def spin_generator(spin: NuclearSpin, branch: int, cfg: NvConfig) -> np.ndarray:
    """2x2 generator ``omega_n I^z + branch * (A . I)``."""
    branch_index(branch)
    h = _generator_field(spin, branch, cfg.omega_n)
    return h[0] * SX + h[1] * SY + h[2] * SZ


def _su2(h: np.ndarray, t) -> np.ndarray:
    """``exp(-i t (h . sigma) / 2)`` for field ``h``; ``t`` scalar or array."""
    t = np.asarray(t, dtype=float)
    mag = float(np.linalg.norm(h))
    half = 0.5 * mag * t
    cos = np.cos(half)[..., None, None]
    if mag == 0.0:
        return np.broadcast_to(ID2, t.shape + (2, 2)).astype(complex)
    n = h / mag
    ndots = n[0] * 2 * SX + n[1] * 2 * SY + n[2] * 2 * SZ
    sin = np.sin(half)[..., None, None]
    return cos * ID2 - 1j * sin * ndots


def per_spin_propagator(spin: NuclearSpin, branch: int, cfg: NvConfig, t) -> np.ndarray:
    """Exact single-spin propagator on one pointer branch (no free phase)."""
    branch_index(branch)
    return _su2(_generator_field(spin, branch, cfg.omega_n), t)


def precession_frequency(spin: NuclearSpin, branch: int, cfg: NvConfig) -> float:
    """``sqrt(a_pl^2 + (omega_n + branch * a_zz)^2)`` with in-plane coupling ``a_pl``.

    Branch 0 carries no hyperfine term and precesses at ``omega_n``.
    """
    branch_index(branch)
    a_pl = abs(branch) * math.hypot(spin.a_zx, spin.a_zy)
    return math.hypot(a_pl, cfg.omega_n + branch * spin.a_zz)


def spin_density(p: float) -> np.ndarray:
    if not -1.0 <= p <= 1.0:
        raise PolarizationOutOfRange(f"polarization {p} outside [-1, 1]")
    return 0.5 * (ID2 + p * SZ)


def initial_env(spins) -> list:
    """Per-spin factors ``(1 + p_j I^z_j) / 2`` of the polarized bath state."""
    return [spin_density(s.p) for s in spins]


def kron_all(factors) -> np.ndarray:
    return reduce(np.kron, factors, np.ones((1, 1), dtype=complex))


def _embed(op: np.ndarray, j: int, n: int) -> np.ndarray:
    return kron_all([op if s == j else ID2 for s in range(n)])


def _check_dense(cfg: NvConfig):
    d = 2 ** len(cfg.spins)
    if d > cfg.dense_cap:
        raise DenseCapExceeded(
            f"{len(cfg.spins)} spins need dimension {d} > dense cap {cfg.dense_cap}; "
            "use the factorized path"
        )


def build_dense_model(cfg: NvConfig) -> PureDephasingModel:
    _check_dense(cfg)
    n = len(cfg.spins)
    d = 2**n
    h_env = np.zeros((d, d), dtype=complex)
    v = np.zeros((d, d), dtype=complex)
    for j, s in enumerate(cfg.spins):
        h_env += cfg.omega_n * _embed(SZ, j, n)
        v += _embed(s.a_zx * SX + s.a_zy * SY + s.a_zz * SZ, j, n)
    return PureDephasingModel(cfg.epsilons, h_env, [-v, np.zeros_like(v), v],
                              dense_cap=cfg.dense_cap)


def dense_initial_env(cfg: NvConfig) -> np.ndarray:
    _check_dense(cfg)
    return kron_all(initial_env(cfg.spins))


def _free_phase(cfg: NvConfig, i: int, j: int, t) -> np.ndarray:
    eps = cfg.epsilons
    return np.exp(-1j * (eps[branch_index(i)] - eps[branch_index(j)]) * np.asarray(t, dtype=float))


def factorized_prepared_coherence(cfg: NvConfig, prep: int, tau: float, pair, t,
                                  c=None) -> np.ndarray:
    """Post-preparation coherence between branches ``pair`` after preparing ``prep``.

    ``prep`` and ``pair`` use physical labels ``-1, 0, +1``; ``t`` may be a
    scalar or an array. Cost is linear in the number of spins.
    """
    i, j = pair
    amps = as_amplitudes(c, 3)
    ci = amps.c[branch_index(i)]
    cj = amps.c[branch_index(j)]
    branch_index(prep)
    t = np.asarray(t, dtype=float)
    value = np.ones(t.shape, dtype=complex)
    for s in cfg.spins:
        uk = per_spin_propagator(s, prep, cfg, tau)
        rho = uk @ spin_density(s.p) @ uk.conj().T
        ui = per_spin_propagator(s, i, cfg, t)
        uj = per_spin_propagator(s, j, cfg, t)
        value = value * np.einsum("...ab,bc,...ac->...", ui, rho, np.conj(uj))
    if cfg.include_free_phases:
        value = value * _free_phase(cfg, i, j, t)
    return ci * np.conj(cj) * value


def factorized_witness_scan(cfg: NvConfig, protocol: ProtocolConfig):
    """Witness scan on the factorized path; preparations and pairs are indices 0..2."""
    if len(protocol.prep_states) < 2:
        raise InsufficientPrepStates("the witness compares at least two preparations")
    amps = protocol.validate(3)
    pairs = protocol.coherence_pairs(3)
    traces = []
    for k in protocol.prep_states:
        for i, j in pairs:
            vals = factorized_prepared_coherence(
                cfg, index_branch(k), protocol.tau, (index_branch(i), index_branch(j)),
                protocol.time_grid, amps,
            )
            vals.setflags(write=False)
            traces.append(CoherenceTrace((i, j), k, protocol.time_grid, vals))
    report = build_report(traces, protocol.prep_states, pairs, protocol.firing_threshold)
    for k, q in sorted(report.fired_pairs):
        report.prep_distances[(k, q)] = _prepared_distance(cfg, k, q, protocol.tau)
    return report


def _prepared_factors(cfg: NvConfig, k: int, t: float):
    out = []
    for s in cfg.spins:
        u = per_spin_propagator(s, index_branch(k), cfg, t)
        out.append(u @ spin_density(s.p) @ u.conj().T)
    return out


def _prepared_distance(cfg, k, q, t):
    return linalg.product_difference_norm(_prepared_factors(cfg, k, t), _prepared_factors(cfg, q, t))


def factorized_class_one(cfg: NvConfig, t: float, exhaustive: bool = False) -> list:
    """``||R_kk(t) - R_ll(t)||_F`` from per-spin factors (pointer indices)."""
    return [(k, l, _prepared_distance(cfg, k, l, t)) for k, l in class_one_pairs(3, exhaustive)]


def factorized_class_two(cfg: NvConfig, t: float, exhaustive: bool = False) -> list:
    """Commutator norms of propagator products from per-spin factors."""
    w = [[per_spin_propagator(s, b, cfg, t) for s in cfg.spins] for b in BRANCHES]
    out = []
    for i, j, k, l in class_two_quadruples(3, exhaustive):
        a = [x @ y.conj().T for x, y in zip(w[i], w[j])]
        b = [x @ y.conj().T for x, y in zip(w[k], w[l])]
        ab = [x @ y for x, y in zip(a, b)]
        ba = [y @ x for x, y in zip(a, b)]
        out.append(((i, j, k, l), linalg.product_difference_norm(ab, ba)))
    return out


def factorized_verdict(cfg: NvConfig, t: float, tol: float = 1e-8) -> CriteriaReport:
    return CriteriaReport(
        class_one=factorized_class_one(cfg, t),
        class_two=factorized_class_two(cfg, t),
        tolerance=tol,
        time=float(t),
        labels=LABELS,
    )


def _format_float(x: float) -> str:
    return repr(float(x))


def write_spin_table(spins, path) -> None:
    """Write a spin table with header ``r_nm,a_zx,a_zy,a_zz,p``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for s in spins:
        r = "" if s.r_nm is None else _format_float(s.r_nm)
        w.writerow([r] + [_format_float(x) for x in (s.a_zx, s.a_zy, s.a_zz, s.p)])
    atomic_write_text(path, buf.getvalue())


def parse_spin_table(text: str, source: str = "<table>") -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError(f"{source}: empty spin table", row=1)
    header = [h.strip() for h in rows[0]]
    if tuple(header) != TABLE_COLUMNS:
        raise ParseError(
            f"{source}: header must be {','.join(TABLE_COLUMNS)}, got {','.join(header)}", row=1
        )
    spins = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(TABLE_COLUMNS):
            raise ParseError(f"{source}: expected {len(TABLE_COLUMNS)} fields, got {len(row)}",
                             row=lineno)
        vals = {}
        for name, cell in zip(TABLE_COLUMNS, row):
            cell = cell.strip()
            if name == "r_nm" and cell == "":
                vals[name] = None
                continue
            try:
                vals[name] = float(cell)
            except ValueError:
                raise ParseError(f"{source}: not a number: {cell!r}", row=lineno,
                                 column=name) from None
            if not math.isfinite(vals[name]):
                raise ParseError(f"{source}: non-finite value", row=lineno, column=name)
        if not -1.0 <= vals["p"] <= 1.0:
            raise ParseError(f"{source}: polarization outside [-1, 1]", row=lineno, column="p")
        spins.append(NuclearSpin(vals["a_zx"], vals["a_zy"], vals["a_zz"], vals["p"],
                                 r_nm=vals["r_nm"]))
    return spins


def load_spin_table(path=None) -> list:
    """Load a spin table; ``None`` loads the bundled fourteen-spin table."""
    if path is None:
        text = resources.files("qudit_witness").joinpath("data/table1.csv").read_text("utf-8")
        return parse_spin_table(text, "table1.csv")
    with open(path, encoding="utf-8") as fh:
        return parse_spin_table(fh.read(), str(path))


def random_spins(seed: int, count: int, r_min: float = 0.5, r_max: float = 0.7,
                 p: float = 0.0, gamma_e: float = GAMMA_E_PHYSICAL,
                 gamma_n: float = GAMMA_N_C13) -> list:
    """Spins placed uniformly (by volume) in the shell ``r_min <= r <= r_max`` nm."""
    if count < 0:
        raise InvalidRange("count must be non-negative")
    if not MIN_DISTANCE_NM < r_min <= r_max:
        raise InvalidRange(f"need {MIN_DISTANCE_NM} < r_min <= r_max, got [{r_min}, {r_max}]")
    rng = np.random.default_rng(seed)
    spins = []
    for _ in range(count):
        u = rng.uniform()
        r = (r_min**3 + u * (r_max**3 - r_min**3)) ** (1.0 / 3.0)
        r = min(max(r, r_min), r_max)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pos = r * direction
        a = dipolar_couplings(pos, gamma_e, gamma_n)
        spins.append(NuclearSpin(*a, p=p, position=tuple(pos), r_nm=r))
    return spins
