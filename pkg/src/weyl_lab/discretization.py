"""Fourier-Galerkin matrices of the operators on the symmetric mode window.

The operator sum_alpha a_alpha(x) D^alpha + q(x), D = -i d/dx, acts on the
orthonormal exponentials e_k = e^{ikx}/sqrt(2*pi); truncating to the window
k = -K..K gives the dense (2K+1) x (2K+1) matrix with entries

    A[j, k] = sum_alpha a_alpha-hat(j - k) k^alpha + q-hat(j - k),

a sum of Toeplitz bands scaled columnwise.  The adjoint-conjugation symmetry
A = G A* G (G the conjugation u -> conj(u), which maps e_k to e_{-k}) reads
A[j, k] = A[-k, -j] entrywise: reflection across the anti-diagonal.  The
``symmetrize`` projection averages a matrix with its reflection, which is the
matrix half-sum (1/2)(P + G P* G); multiplication operators are already
symmetric and are left untouched.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigError
from .perturbation import RandomPotential
from .symbols import SymbolModel
from .trig import TrigPoly


def _symbol_digest(model: SymbolModel) -> str:
    payload = json.dumps(model.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class DiscretizedOperator:
    """Dense Galerkin matrix on modes -K..K with assembly provenance."""

    modes_K: int
    matrix: np.ndarray
    order_m: int
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return 2 * self.modes_K + 1

    def mode_numbers(self) -> np.ndarray:
        return np.arange(-self.modes_K, self.modes_K + 1)


def _band_matrix(coeffs: np.ndarray, half_band: int, K: int) -> np.ndarray:
    """Toeplitz matrix T[i, j] = coeffs[half_band + (i - j)], window-clipped."""
    dim = 2 * K + 1
    full = np.zeros(2 * dim - 1, dtype=complex)
    lo = max(-half_band, -(dim - 1))
    hi = min(half_band, dim - 1)
    for nu in range(lo, hi + 1):
        full[dim - 1 + nu] = coeffs[half_band + nu]
    col = full[dim - 1:]
    row = full[dim - 1::-1]
    return toeplitz(col, row)


def potential_matrix(potential: RandomPotential, modes_K: int) -> np.ndarray:
    """Galerkin matrix of the multiplication by q on modes -K..K."""
    qhat = potential.exponential_coeffs(2 * modes_K)
    return _band_matrix(qhat, 2 * modes_K, modes_K)


def assemble_operator(model: SymbolModel, potential: RandomPotential | None,
                      modes_K: int) -> DiscretizedOperator:
    """Galerkin matrix of sum_alpha a_alpha D^alpha + q on modes -K..K."""
    if modes_K < 1:
        raise ConfigError(f"modes_K must be >= 1, got {modes_K}")
    K = modes_K
    dim = 2 * K + 1
    k_modes = np.arange(-K, K + 1, dtype=float)
    A = np.zeros((dim, dim), dtype=complex)

    terms: list[tuple[int, TrigPoly]] = [(model.order_m, model.top_coeff)]
    terms += sorted(model.lower_coeffs.items())
    for alpha, poly in terms:
        coeffs, d = poly.exponential_coeffs()
        band = _band_matrix(coeffs, d, K)
        A += band * (k_modes ** alpha)[None, :]

    if potential is not None:
        A += potential_matrix(potential, K)

    prov = {
        "symbol_digest": _symbol_digest(model),
        "potential_entropy": None if potential is None else potential.seed_entropy,
        "symmetrized": False,
    }
    return DiscretizedOperator(modes_K=K, matrix=A, order_m=model.order_m, provenance=prov)


def conjugation_flip(A: np.ndarray) -> np.ndarray:
    """Matrix of G A* G on the symmetric window: entries B[j, k] = A[-k, -j]."""
    return A[::-1, ::-1].T


def symmetrize(op: DiscretizedOperator) -> DiscretizedOperator:
    """Project onto the adjoint-conjugation symmetric part, (A + G A* G)/2.

    The output satisfies A = G A* G identically; matrices that already do
    (multiplication operators in particular) are fixed points.
    """
    B = 0.5 * (op.matrix + conjugation_flip(op.matrix))
    prov = dict(op.provenance)
    prov["symmetrized"] = True
    return DiscretizedOperator(modes_K=op.modes_K, matrix=B,
                               order_m=op.order_m, provenance=prov)


def adjoint_symmetry_residual(op: DiscretizedOperator, n_vectors: int = 8,
                              seed: int = 0) -> float:
    """Max relative residual of A* v = G A G v over random vectors.

    G acts on coefficient vectors as (G u)_k = conj(u_{-k}).  A matrix
    satisfying the entrywise symmetry returns residuals at rounding level.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), op.modes_K)))
    A = op.matrix
    scale = np.linalg.norm(A, ord="fro")
    if scale == 0.0:
        return 0.0
    worst = 0.0
    for _ in range(n_vectors):
        v = rng.normal(size=op.dim) + 1j * rng.normal(size=op.dim)
        lhs = A.conj().T @ v
        gv = np.conj(v[::-1])
        rhs = np.conj((A @ gv)[::-1])
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / (scale * np.linalg.norm(v))))
    return worst
