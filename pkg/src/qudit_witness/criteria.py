"""
Separability criteria for block-form qudit-environment states.

Two families of conditions decide separability of a state evolved from
``|psi><psi| (x) R0`` (all amplitudes nonzero):

* class one -- equal conditional environment states, ``R_kk(t) = R_ll(t)``.
  ``N - 1`` of these are independent; the canonical set anchors ``l = 0``.
* class two -- commuting products of conditional propagators,
  ``[w_i w_j^dagger, w_k w_l^dagger] = 0``. With ``W_k = w_k w_0^dagger`` the
  ``(N-1)(N-2)/2`` canonical conditions are ``[W_k, W_l] = 0`` for
  ``1 <= k < l <= N-1``; every other product is a word in the ``W_k``.

Distances and commutators are Frobenius norms, reported unnormalised.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DenseCapExceeded, DimensionMismatch
from .model import PureDephasingModel, as_amplitudes, assemble, evolve

DEFAULT_TOL = 1e-8
NEGATIVITY_THRESHOLD = 1e-8


class Verdict(str, enum.Enum):
    SEPARABLE = "Separable"
    ENTANGLED_CLASS_ONE = "EntangledClassOne"
    ENTANGLED_CLASS_TWO_ONLY = "EntangledClassTwoOnly"
    ENTANGLED_BOTH = "EntangledBoth"

    @property
    def entangled(self) -> bool:
        return self is not Verdict.SEPARABLE


@dataclass(frozen=True)
class CriteriaReport:
    class_one: list
    class_two: list
    tolerance: float
    time: float = 0.0
    labels: tuple | None = None

    @property
    def verdict(self) -> Verdict:
        return classify(self.class_one, self.class_two, self.tolerance)

    def _label(self, k):
        return k if self.labels is None else self.labels[k]

    def to_dict(self) -> dict:
        lab = self._label
        return {
            "time": self.time,
            "tolerance": self.tolerance,
            "verdict": self.verdict.value,
            "class_one": [
                {"k": lab(k), "l": lab(l), "distance": d} for k, l, d in self.class_one
            ],
            "class_two": [
                {"indices": [lab(x) for x in q], "commutator_norm": v}
                for q, v in self.class_two
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def classify(class_one, class_two, tol: float) -> Verdict:
    one = any(d > tol for *_, d in class_one)
    two = any(v > tol for _, v in class_two)
    if one and two:
        return Verdict.ENTANGLED_BOTH
    if one:
        return Verdict.ENTANGLED_CLASS_ONE
    if two:
        return Verdict.ENTANGLED_CLASS_TWO_ONLY
    return Verdict.SEPARABLE


def class_one_pairs(n: int, exhaustive: bool = False):
    if exhaustive:
        return list(itertools.combinations(range(n), 2))
    return [(k, 0) for k in range(1, n)]


def class_two_quadruples(n: int, exhaustive: bool = False):
    if exhaustive:
        return list(itertools.product(range(n), repeat=4))
    return [(k, 0, l, 0) for k, l in itertools.combinations(range(1, n), 2)]


def _diagonal_blocks(model, r0, t):
    state = evolve(model, None, r0, t)
    return np.stack([state.blocks[k, k] for k in range(model.n_sys)])


def class_one_check(model: PureDephasingModel, r0, t: float, tol: float = DEFAULT_TOL,
                    exhaustive: bool = False) -> list:
    """Distances ``||R_kk(t) - R_ll(t)||_F``.

    The canonical set holds pairs ``(k, 0)``; ``exhaustive=True`` scans all
    ``k < l`` and verifies the triangle bound against the canonical pairs.
    """
    rkk = _diagonal_blocks(model, r0, t)
    out = [
        (k, l, linalg.frobenius(rkk[k] - rkk[l]))
        for k, l in class_one_pairs(model.n_sys, exhaustive)
    ]
    if exhaustive:
        anchor = {k: linalg.frobenius(rkk[k] - rkk[0]) for k in range(model.n_sys)}
        for k, l, dist in out:
            if anchor[k] <= tol and anchor[l] <= tol and dist > 2 * tol:
                raise ArithmeticError(
                    f"triangle bound violated for pair ({k}, {l}): {dist:.3e} > 2*tol"
                )
    return out


def class_two_check(model: PureDephasingModel, t: float, exhaustive: bool = False) -> list:
    """Commutator norms of conditional-propagator products; independent of any state.

    Free phases are dropped: they only rescale each product by a unit scalar.
    """
    w = np.stack([model.propagator(k, t) for k in range(model.n_sys)])
    out = []
    for i, j, k, l in class_two_quadruples(model.n_sys, exhaustive):
        a = w[i] @ linalg.adjoint(w[j])
        b = w[k] @ linalg.adjoint(w[l])
        out.append(((i, j, k, l), linalg.frobenius(linalg.commutator(a, b))))
    return out


def separability_verdict(model: PureDephasingModel, r0, t: float,
                         tol: float = DEFAULT_TOL) -> CriteriaReport:
    return CriteriaReport(
        class_one=class_one_check(model, r0, t, tol),
        class_two=class_two_check(model, t),
        tolerance=tol,
        time=float(t),
    )


@dataclass(frozen=True)
class CrossCheck:
    verdict: Verdict
    negativity: float
    consistent: bool


def oracle_crosscheck(model: PureDephasingModel, c, r0, t: float,
                      tol: float = DEFAULT_TOL,
                      dense_cap: int = linalg.DEFAULT_DENSE_CAP) -> CrossCheck:
    """Compare the criteria verdict with the negativity of the assembled state."""
    n, d = model.n_sys, model.dim_env
    if n * d > dense_cap:
        raise DenseCapExceeded(f"joint dimension {n * d} exceeds dense cap {dense_cap}")
    amps = as_amplitudes(c, n)
    if np.any(np.abs(amps.c) == 0):
        raise DimensionMismatch("every amplitude must be nonzero for the cross-check")
    verdict = separability_verdict(model, r0, t, tol).verdict
    neg = linalg.negativity(assemble(evolve(model, amps, r0, t)), n, d)
    consistent = (verdict is Verdict.SEPARABLE) == (neg <= NEGATIVITY_THRESHOLD)
    return CrossCheck(verdict, neg, consistent)
