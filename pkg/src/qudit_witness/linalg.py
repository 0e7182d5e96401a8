"""
Dense complex-matrix kernel.

All matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Functions never modify their inputs and always return fresh arrays.

Propagators are built from the eigendecomposition of a Hermitian generator,

    U(t) = P diag(exp(-i lambda t)) P^dagger,

which is unitary to machine precision for every ``t``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, NotADensityMatrix

HERMITIAN_RTOL = 1e-10
DENSITY_ATOL = 1e-9
EIG_ZERO = 1e-12
DEFAULT_DENSE_CAP = 2**10


def as_matrix(m, square: bool = False) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def adjoint(m) -> np.ndarray:
    return np.conj(np.asarray(m, dtype=complex)).swapaxes(-1, -2).copy()


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a (x) b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def frobenius(m) -> float:
    return float(np.linalg.norm(m))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def hermiticity_defect(h) -> float:
    """Relative Frobenius distance between ``h`` and its adjoint."""
    h = np.asarray(h, dtype=complex)
    scale = np.linalg.norm(h)
    diff = np.linalg.norm(h - adjoint(h))
    if diff == 0.0:
        return 0.0
    return float(diff / scale)


def check_hermitian(h, name: str = "matrix", rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    h = as_matrix(h, square=True)
    defect = hermiticity_defect(h)
    if defect > rtol:
        raise NonHermitianInput(f"{name} is not Hermitian (relative defect {defect:.3e})")
    return h


def check_density(rho, name: str = "density matrix", atol: float = DENSITY_ATOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of ``rho``."""
    rho = as_matrix(rho, square=True)
    if hermiticity_defect(rho) > HERMITIAN_RTOL:
        raise NotADensityMatrix(f"{name} is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise NotADensityMatrix(f"{name} has trace {tr.real:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(0.5 * (rho + adjoint(rho)))[0]
    if lam_min < -atol:
        raise NotADensityMatrix(f"{name} has negative eigenvalue {lam_min:.3e}")
    return rho


class HermitianEig:
    """Cached eigendecomposition of a Hermitian generator.

    Evaluating the propagator at many times costs one ``eigh`` plus a
    matrix product per time.
    """

    def __init__(self, h):
        h = check_hermitian(h, "generator")
        self.values, self.vectors = np.linalg.eigh(0.5 * (h + adjoint(h)))

    def propagator(self, t) -> np.ndarray:
        """``exp(-i H t)`` for scalar ``t`` (2-D result) or an array of times (3-D)."""
        t = np.asarray(t, dtype=float)
        phases = np.exp(-1j * np.multiply.outer(t, self.values))
        p = self.vectors
        return (p * phases[..., None, :]) @ adjoint(p)


def hermitian_propagator(h, t) -> np.ndarray:
    """Unitary ``exp(-i H t)`` of a Hermitian ``H`` (hbar = 1).

    ``t`` may be a scalar or a 1-D array of times; in the latter case a
    stack of shape ``(len(t), d, d)`` is returned.
    """
    return HermitianEig(h).propagator(t)


def _split_dims(m, dim_sys: int, dim_env: int) -> np.ndarray:
    m = as_matrix(m, square=True)
    if dim_sys < 1 or dim_env < 1 or m.shape[0] != dim_sys * dim_env:
        raise DimensionMismatch(
            f"matrix of size {m.shape[0]} does not factor as {dim_sys} x {dim_env}"
        )
    return m.reshape(dim_sys, dim_env, dim_sys, dim_env)


def partial_transpose(m, dim_sys: int, dim_env: int) -> np.ndarray:
    """Transpose on the system (first) tensor factor."""
    r = _split_dims(m, dim_sys, dim_env)
    n = dim_sys * dim_env
    return r.transpose(2, 1, 0, 3).reshape(n, n).copy()


def partial_trace_env(m, dim_sys: int, dim_env: int) -> np.ndarray:
    return np.einsum("iaja->ij", _split_dims(m, dim_sys, dim_env))


def partial_trace_sys(m, dim_sys: int, dim_env: int) -> np.ndarray:
    return np.einsum("iaib->ab", _split_dims(m, dim_sys, dim_env))


def negativity(m, dim_sys: int, dim_env: int) -> float:
    """Sum of the absolute values of the negative eigenvalues of the partial transpose.

    Eigenvalues with magnitude below ``EIG_ZERO`` count as zero.
    """
    rho = check_density(m)
    pt = partial_transpose(rho, dim_sys, dim_env)
    lam = np.linalg.eigvalsh(0.5 * (pt + adjoint(pt)))
    neg = lam[lam < -EIG_ZERO]
    return float(-neg.sum()) if neg.size else 0.0


def product_difference_norm(a_factors, b_factors) -> float:
    """Frobenius norm of ``(x)_j a_j - (x)_j b_j`` without forming either product.

    The difference is telescoped into terms
    ``b_1 .. b_{j-1} (x) (a_j - b_j) (x) a_{j+1} ..`` whose pairwise inner
    products factor over sites, so small differences are resolved to full
    relative precision instead of cancelling against ``||a||^2 + ||b||^2``.
    Cost is quadratic in the number of factors.
    """
    a = [np.asarray(x, dtype=complex) for x in a_factors]
    b = [np.asarray(x, dtype=complex) for x in b_factors]
    if len(a) != len(b):
        raise DimensionMismatch("factor lists differ in length")
    n = len(a)
    if n == 0:
        return 0.0
    d = [x - y for x, y in zip(a, b)]

    def inner(x, y):
        return np.vdot(x, y)

    aa = np.array([inner(x, x) for x in a])
    bb = np.array([inner(y, y) for y in b])
    ab = np.array([inner(x, y) for x, y in zip(a, b)])
    ba = np.conj(ab)
    total = 0.0 + 0.0j
    for j in range(n):
        for k in range(n):
            if j == k:
                val = np.prod(bb[:j]) * inner(d[j], d[j]) * np.prod(aa[j + 1:])
            elif j < k:
                # sites < j: b,b ; j: d,b ; j<s<k: a,b ; k: a,d ; > k: a,a
                val = (
                    np.prod(bb[:j])
                    * inner(d[j], b[j])
                    * np.prod(ab[j + 1:k])
                    * inner(a[k], d[k])
                    * np.prod(aa[k + 1:])
                )
            else:
                val = (
                    np.prod(bb[:k])
                    * inner(b[k], d[k])
                    * np.prod(ba[k + 1:j])
                    * inner(d[j], a[j])
                    * np.prod(aa[j + 1:])
                )
            total += val
    return float(np.sqrt(max(total.real, 0.0)))
