"""
Pure-dephasing qudit-environment models and their block-form evolution.

The joint Hamiltonian is

    H = sum_k eps_k |k><k|  +  H_E  +  sum_k |k><k| (x) V_k

with hbar = 1, so energies are angular frequencies in rad per time unit.
The environment evolves conditionally on the pointer state ``k`` under
``w_k(t) = exp(-i eps_k t) exp(-i (H_E + V_k) t)``; a product initial state
``|psi><psi| (x) R0`` then stays of the block form

    sigma(t) = sum_{k,l} c_k c_l^* |k><l| (x) R_kl(t),
    R_kl(t)  = w_k(t) R0 w_l(t)^dagger.

States are kept as the grid of ``R_kl`` blocks; the full ``(N d) x (N d)``
matrix is built only by :func:`assemble`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .errors import DenseCapExceeded, DimensionMismatch, IndexOutOfRange, ParseError
from .linalg import adjoint

HBAR = 1.0
AMPLITUDE_ATOL = 1e-10
BLOCK_ATOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureDephasingModel:
    """Hamiltonian data for a pure-dephasing model.

    Parameters
    ----------
    epsilons : sequence of float
        Pointer-state energies, one per system level.
    h_env : (d, d) array
        Free environment Hamiltonian.
    couplings : sequence of (d, d) arrays
        Conditional couplings ``V_k``, one per system level.
    dense_cap : int
        Largest environment dimension accepted by the dense path.
    """

    epsilons: np.ndarray
    h_env: np.ndarray
    couplings: np.ndarray
    dense_cap: int = linalg.DEFAULT_DENSE_CAP

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float).reshape(-1)
        h_env = linalg.check_hermitian(self.h_env, "h_env")
        d = h_env.shape[0]
        if d > self.dense_cap:
            raise DenseCapExceeded(
                f"environment dimension {d} exceeds the dense cap {self.dense_cap}"
            )
        vs = [linalg.check_hermitian(v, f"coupling {k}") for k, v in enumerate(self.couplings)]
        if len(vs) != eps.size:
            raise DimensionMismatch(
                f"{eps.size} energies but {len(vs)} couplings"
            )
        if eps.size < 1:
            raise DimensionMismatch("model needs at least one pointer state")
        for k, v in enumerate(vs):
            if v.shape != h_env.shape:
                raise DimensionMismatch(
                    f"coupling {k} has shape {v.shape}, environment is {h_env.shape}"
                )
        eps.setflags(write=False)
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "h_env", _frozen(h_env))
        object.__setattr__(self, "couplings", _frozen(np.stack(vs)))

    @property
    def n_sys(self) -> int:
        return self.epsilons.size

    @property
    def dim_env(self) -> int:
        return self.h_env.shape[0]

    @cached_property
    def _eigs(self):
        return [linalg.HermitianEig(self.h_env + v) for v in self.couplings]

    def check_index(self, k: int) -> int:
        if not 0 <= int(k) < self.n_sys or int(k) != k:
            raise IndexOutOfRange(f"pointer index {k} outside [0, {self.n_sys})")
        return int(k)

    def propagator(self, k: int, t, include_free_phase: bool = False) -> np.ndarray:
        """Conditional propagator ``w_k``; ``t`` scalar or 1-D array."""
        k = self.check_index(k)
        u = self._eigs[k].propagator(t)
        if include_free_phase:
            phase = np.exp(-1j * self.epsilons[k] * np.asarray(t, dtype=float) / HBAR)
            u = u * phase[..., None, None]
        return u

    def to_dict(self) -> dict:
        return {
            "n_sys": self.n_sys,
            "epsilons": [float(e) for e in self.epsilons],
            "h_env": encode_matrix(self.h_env),
            "couplings": [encode_matrix(v) for v in self.couplings],
        }

    @classmethod
    def from_dict(cls, doc: dict, dense_cap: int = linalg.DEFAULT_DENSE_CAP):
        if not isinstance(doc, dict):
            raise ParseError("model document must be a JSON object")
        for key in ("n_sys", "epsilons", "h_env", "couplings"):
            if key not in doc:
                raise ParseError(f"missing field '{key}'", column=key)
        n_sys = doc["n_sys"]
        if not isinstance(n_sys, int) or n_sys < 1:
            raise ParseError("n_sys must be a positive integer", column="n_sys")
        eps = doc["epsilons"]
        if not isinstance(eps, list) or len(eps) != n_sys:
            raise ParseError(f"epsilons must be a list of {n_sys} numbers", column="epsilons")
        couplings = doc["couplings"]
        if not isinstance(couplings, list) or len(couplings) != n_sys:
            raise ParseError(f"couplings must be a list of {n_sys} matrices", column="couplings")
        try:
            eps = [float(e) for e in eps]
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric energy: {exc}", column="epsilons") from None
        h_env = decode_matrix(doc["h_env"], "h_env")
        vs = [decode_matrix(v, f"couplings[{k}]") for k, v in enumerate(couplings)]
        return cls(eps, h_env, vs, dense_cap=dense_cap)


def encode_matrix(m) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(doc, name: str = "matrix") -> np.ndarray:
    if not isinstance(doc, list) or not doc:
        raise ParseError(f"{name} must be a non-empty list of rows", column=name)
    rows = []
    width = None
    for r, row in enumerate(doc):
        if not isinstance(row, list):
            raise ParseError(f"{name} row is not a list", row=r, column=name)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{name} has ragged rows", row=r, column=name)
        vals = []
        for c, pair in enumerate(row):
            if (
                not isinstance(pair, (list, tuple))
                or len(pair) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
            ):
                raise ParseError(f"{name}[{r}][{c}] is not an [re, im] pair", row=r, column=c)
            vals.append(complex(pair[0], pair[1]))
        rows.append(vals)
    return np.array(rows, dtype=complex)


def load_model(path, dense_cap: int = linalg.DEFAULT_DENSE_CAP) -> PureDephasingModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", row=exc.lineno, column=exc.colno) from None
    return PureDephasingModel.from_dict(doc, dense_cap=dense_cap)


def save_model(model: PureDephasingModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_density(path) -> np.ndarray:
    """Read an environment state document ``{"r0": matrix}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", row=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict) or "r0" not in doc:
        raise ParseError("missing field 'r0'", column="r0")
    return decode_matrix(doc["r0"], "r0")


@dataclass(frozen=True, eq=False)
class SystemAmplitudes:
    """Pure system state ``|psi> = sum_k c_k |k>`` in the pointer basis."""

    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=complex).reshape(-1)
        if c.size == 0:
            raise DimensionMismatch("amplitudes must be non-empty")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > AMPLITUDE_ATOL:
            raise ValueError(f"amplitudes have squared norm {norm:.12g}, expected 1")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def equal(cls, n: int) -> "SystemAmplitudes":
        return cls(np.full(n, 1.0 / np.sqrt(n)))

    def __len__(self):
        return self.c.size


def as_amplitudes(c, n: int | None = None) -> SystemAmplitudes:
    if c is None:
        if n is None:
            raise ValueError("system size needed for default amplitudes")
        return SystemAmplitudes.equal(n)
    amps = c if isinstance(c, SystemAmplitudes) else SystemAmplitudes(c)
    if n is not None and len(amps) != n:
        raise DimensionMismatch(f"{len(amps)} amplitudes for a {n}-level system")
    return amps


@dataclass(frozen=True, eq=False)
class BlockJointState:
    """Joint state held as environment blocks ``blocks[k, l] = R_kl``."""

    amplitudes: SystemAmplitudes
    blocks: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        blocks = _frozen(self.blocks)
        n = len(self.amplitudes)
        if blocks.ndim != 4 or blocks.shape[:2] != (n, n) or blocks.shape[2] != blocks.shape[3]:
            raise DimensionMismatch(f"blocks of shape {blocks.shape} for {n} amplitudes")
        swapped = adjoint(blocks.transpose(1, 0, 2, 3))
        if np.max(np.abs(blocks - swapped), initial=0.0) > BLOCK_ATOL:
            raise ValueError("blocks violate R_lk = R_kl^dagger")
        for k in range(n):
            linalg.check_density(blocks[k, k], f"block R_{k}{k}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_sys(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim_env(self) -> int:
        return self.blocks.shape[2]


def conditional_propagator(model: PureDephasingModel, k: int, t: float,
                           include_free_phase: bool = False) -> np.ndarray:
    return model.propagator(k, float(t), include_free_phase)


def evolve(model: PureDephasingModel, c, r0, t: float,
           include_free_phase: bool = False) -> BlockJointState:
    """Evolve ``|psi><psi| (x) r0`` for time ``t`` in block form."""
    amps = as_amplitudes(c, model.n_sys)
    r0 = linalg.check_density(r0, "r0")
    if r0.shape[0] != model.dim_env:
        raise DimensionMismatch(
            f"r0 has dimension {r0.shape[0]}, environment is {model.dim_env}"
        )
    w = np.stack([model.propagator(k, t, include_free_phase) for k in range(model.n_sys)])
    left = w @ r0
    blocks = np.einsum("kab,lcb->klac", left, np.conj(w))
    return BlockJointState(amps, blocks, float(t))


def assemble(state: BlockJointState) -> np.ndarray:
    """Full ``(N d) x (N d)`` joint density matrix."""
    c = state.amplitudes.c
    n, d = state.n_sys, state.dim_env
    weighted = np.outer(c, np.conj(c))[:, :, None, None] * state.blocks
    return weighted.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def reduced_system(state: BlockJointState) -> np.ndarray:
    c = state.amplitudes.c
    traces = np.trace(state.blocks, axis1=2, axis2=3)
    return np.outer(c, np.conj(c)) * traces


def dense_hamiltonian(model: PureDephasingModel) -> np.ndarray:
    """Joint Hamiltonian built with explicit Kronecker products (validation only)."""
    n, d = model.n_sys, model.dim_env
    h = np.kron(np.diag(model.epsilons).astype(complex), np.eye(d))
    h += np.kron(np.eye(n), model.h_env)
    for k in range(n):
        proj = np.zeros((n, n), dtype=complex)
        proj[k, k] = 1.0
        h += np.kron(proj, model.couplings[k])
    return h
