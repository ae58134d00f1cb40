"""Pointwise tensor quantities of a metric at a tangent sample.

The fundamental tensor is half the fiber Hessian of the metric scalar, the
Cartan tensor a quarter of its third fiber derivative; both come out of one
jet evaluation, so their index symmetries hold exactly (each unordered index
set maps to a single stored coefficient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .dsl import MetricDefinition, TangentSample
from .errors import InadmissibleSample, SingularMetric

DEGENERACY_TOL = 1e-12


def _require_admissible(m: MetricDefinition, v: TangentSample) -> None:
    if not m.admissible(v):
        raise InadmissibleSample(f"sample {v!r} is outside the domain of {m.name!r}")


def _fiber_index(n: int, *ys: int) -> tuple[int, ...]:
    alpha = [0] * (2 * n)
    for i in ys:
        alpha[n + i] += 1
    return tuple(alpha)


@dataclass(frozen=True)
class FundamentalTensor:
    matrix: np.ndarray      # (n, n), symmetric
    basepoint: TangentSample

    def pair(self, u, w) -> float:
        return float(np.asarray(u) @ self.matrix @ np.asarray(w))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class CartanTensor:
    array: np.ndarray       # (n, n, n), totally symmetric
    basepoint: TangentSample

    def contract(self, u, w, z) -> float:
        return float(np.einsum("ijk,i,j,k", self.array, u, w, z))


def fundamental_tensor_from_jet(L_jet: jets.Jet, n: int) -> np.ndarray:
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = 0.5 * L_jet.derivative(_fiber_index(n, i, j))
    return g


def fundamental_tensor(m: MetricDefinition, v: TangentSample) -> FundamentalTensor:
    """g_ij = (1/2) d^2 L / dy^i dy^j at the sample."""
    _require_admissible(m, v)
    return FundamentalTensor(fundamental_tensor_from_jet(m.jet(v, 2), v.dim), v)


def cartan_tensor(m: MetricDefinition, v: TangentSample) -> CartanTensor:
    """C_ijk = (1/4) d^3 L / dy^i dy^j dy^k at the sample."""
    _require_admissible(m, v)
    L_jet = m.jet(v, 3)
    n = v.dim
    C = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                val = 0.25 * L_jet.derivative(_fiber_index(n, i, j, k))
                for perm in ((i, j, k), (i, k, j), (j, i, k),
                             (j, k, i), (k, i, j), (k, j, i)):
                    C[perm] = val
    return CartanTensor(C, v)


def legendre(m: MetricDefinition, v: TangentSample) -> np.ndarray:
    """The covector g_v(v, .), computed as half the fiber gradient."""
    _require_admissible(m, v)
    L_jet = m.jet(v, 2)
    n = v.dim
    return np.array([0.5 * L_jet.derivative(_fiber_index(n, i)) for i in range(n)])


def inverse_metric(g: FundamentalTensor | np.ndarray) -> np.ndarray:
    """Inverse of the fundamental tensor, or SingularMetric if degenerate.

    Degeneracy threshold: |det g| relative to max|g_ij|^n.
    """
    mat = g.matrix if isinstance(g, FundamentalTensor) else np.asarray(g, dtype=float)
    n = mat.shape[0]
    scale = float(np.max(np.abs(mat)))
    det = float(np.linalg.det(mat))
    if scale == 0.0 or abs(det) <= DEGENERACY_TOL * scale ** n:
        raise SingularMetric(
            f"fundamental tensor is degenerate: |det|={abs(det):.3e} "
            f"against scale {scale:.3e}")
    return np.linalg.solve(mat, np.eye(n))
