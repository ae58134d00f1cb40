"""Variations of the conformally scaled energy, Jacobi fields, focal points,
and the transfer of Jacobi fields between conformally related metrics.

Everything here is expressed through the connection of ONE base metric; the
scaled metric never needs its own connection.  Along a fixed curve all
pointwise geometry (fundamental tensor, Christoffel symbols, Jacobi operator,
factor gradients) is assembled once into a `CurveGeometry` table and reused
by the quadrature-based formulas.

Curvature terms of the form g(R(vel, V)W, vel) are evaluated through the
Jacobi operator using its g-self-adjointness, g(R(vel,V)W, vel) = -g(AV, W)
with A the operator of D^2 J = A J; the full curvature tensor route exists in
`connection.chern_curvature` and the two are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import null_space

from .connection import ConnectionFrame
from .curves import DiscreteCurve, Reparametrization, spline_derivative
from .dsl import MetricDefinition, TangentSample, parse_expression, evaluate
from .errors import FinslabError, GridMismatch, InadmissibleSample
from .geodesics import (LIGHTLIKE_TOL, factor_rate, factor_values,
                        lightlike_defect, reparametrize_conformal)

__all__ = [
    "SubmanifoldPatch", "VariationField", "JacobiSolution", "FocalPoint",
    "CurveGeometry", "first_variation", "second_variation", "index_form",
    "energy_derivative_fd",
    "second_fundamental_form", "normal_second_fundamental_form",
    "integrate_jacobi", "integrate_jacobi_basis", "find_focal_points",
    "transfer_jacobi", "conformal_jacobi_residual", "boundary_residual",
    "verify_focal_correspondence", "CorrespondenceReport",
]


# --------------------------------------------------------------------------
# submanifold patches
# --------------------------------------------------------------------------

class SubmanifoldPatch:
    """Parametrized immersion u in R^d -> chart coordinates.

    The immersion and its derivatives are callables; when analytic
    derivatives are not supplied they are produced by Richardson-extrapolated
    central differences in the parameters, which is accurate far beyond the
    tolerances used by the focal experiments.
    """

    def __init__(self, dim_params: int, immersion, basepoint,
                 jacobian=None, hessian=None, name: str = "patch"):
        self.d = int(dim_params)
        self._map = immersion
        self.basepoint = np.atleast_1d(np.asarray(basepoint, dtype=float))
        self._jacobian = jacobian
        self._hessian = hessian
        self.name = name

    @staticmethod
    def from_point(x0) -> "SubmanifoldPatch":
        x0 = np.asarray(x0, dtype=float)
        return SubmanifoldPatch(0, lambda u: x0, np.zeros(0), name="point")

    @staticmethod
    def from_expressions(sources: list[str], basepoint, name: str = "patch"
                         ) -> "SubmanifoldPatch":
        """Immersion given as expressions in parameters x0..x{d-1}."""
        basepoint = np.atleast_1d(np.asarray(basepoint, dtype=float))
        d = basepoint.size
        trees = [parse_expression(src, d) for src in sources]

        def immersion(u):
            u = np.atleast_1d(np.asarray(u, dtype=float))
            return np.array([float(evaluate(t, u, u)) for t in trees])

        return SubmanifoldPatch(d, immersion, basepoint, name=name)

    def point(self, u=None) -> np.ndarray:
        u = self.basepoint if u is None else np.atleast_1d(np.asarray(u, float))
        return np.asarray(self._map(u), dtype=float)

    def tangent_basis(self, u=None) -> np.ndarray:
        """(n, d) matrix whose columns span the tangent space at u."""
        u = self.basepoint if u is None else np.atleast_1d(np.asarray(u, float))
        if self.d == 0:
            return np.zeros((self.point(u).size, 0))
        if self._jacobian is not None:
            return np.asarray(self._jacobian(u), dtype=float)
        return _param_jacobian(self._map, u)

    def second_derivatives(self, u=None) -> np.ndarray:
        """(n, d, d) array of second parameter derivatives of the immersion."""
        u = self.basepoint if u is None else np.atleast_1d(np.asarray(u, float))
        n = self.point(u).size
        if self.d == 0:
            return np.zeros((n, 0, 0))
        if self._hessian is not None:
            return np.asarray(self._hessian(u), dtype=float)
        out = np.empty((n, self.d, self.d))
        for a in range(self.d):
            for b in range(a, self.d):
                out[:, a, b] = out[:, b, a] = _param_second(self._map, u, a, b)
        return out


def _param_jacobian(fn, u, h: float = 1e-5) -> np.ndarray:
    cols = []
    for a in range(u.size):
        e = np.zeros_like(u)
        e[a] = 1.0
        d1 = (np.asarray(fn(u + h * e)) - np.asarray(fn(u - h * e))) / (2 * h)
        d2 = (np.asarray(fn(u + 0.5 * h * e)) - np.asarray(fn(u - 0.5 * h * e))) / h
        cols.append((4.0 * d2 - d1) / 3.0)
    return np.stack(cols, axis=1)


def _param_second(fn, u, a: int, b: int, h: float = 1e-4) -> np.ndarray:
    ea = np.zeros_like(u)
    eb = np.zeros_like(u)
    ea[a] = 1.0
    eb[b] = 1.0

    def stencil(step):
        if a == b:
            return (np.asarray(fn(u + step * ea)) - 2.0 * np.asarray(fn(u))
                    + np.asarray(fn(u - step * ea))) / step ** 2
        return (np.asarray(fn(u + step * (ea + eb))) - np.asarray(fn(u + step * (ea - eb)))
                - np.asarray(fn(u - step * (ea - eb))) + np.asarray(fn(u - step * (ea + eb)))
                ) / (4.0 * step ** 2)

    d1, d2 = stencil(h), stencil(h / 2)
    return (4.0 * d2 - d1) / 3.0


# --------------------------------------------------------------------------
# fields along curves
# --------------------------------------------------------------------------

@dataclass
class VariationField:
    """Samples of a variation vector field, optionally with the transverse
    acceleration of the underlying two-parameter map."""
    values: np.ndarray
    accel: np.ndarray | None = None

    @staticmethod
    def from_function(curve: DiscreteCurve, fn, accel_fn=None) -> "VariationField":
        vals = np.array([fn(t) for t in curve.grid], dtype=float)
        acc = None
        if accel_fn is not None:
            acc = np.array([accel_fn(t) for t in curve.grid], dtype=float)
        return VariationField(vals, acc)

    @staticmethod
    def affine(curve: DiscreteCurve, m: MetricDefinition, fn) -> "VariationField":
        """Field for the chart-affine variation x(t) + s*W(t); its transverse
        acceleration is Gamma(vel)(W, W) since the chart second s-derivative
        vanishes."""
        vals = np.array([fn(t) for t in curve.grid], dtype=float)
        acc = np.empty_like(vals)
        for k in range(curve.grid.size):
            sample = TangentSample(curve.positions[k], curve.velocities[k])
            gamma = ConnectionFrame(m, sample, order=3).christoffel()
            acc[k] = np.einsum("kij,i,j->k", gamma, vals[k], vals[k])
        return VariationField(vals, acc)


@dataclass
class JacobiSolution:
    grid: np.ndarray
    J: np.ndarray          # (npts, n) field values
    K: np.ndarray          # (npts, n) covariant derivative along the curve
    J_dot: np.ndarray      # (npts, n) coordinate time derivative, for dense output

    def spline(self):
        return CubicHermiteSpline(self.grid, self.J, self.J_dot, axis=0)


# --------------------------------------------------------------------------
# pointwise geometry tables along one curve
# --------------------------------------------------------------------------

class CurveGeometry:
    """Per-node geometry of a base metric referenced at the curve velocity.

    Builds one order-4 frame per node on demand and exposes the fundamental
    tensor, Christoffel symbols, Jacobi operator, and (when a factor is
    given) its values, time derivative, and horizontal/vertical gradients.
    """

    def __init__(self, curve: DiscreteCurve, m: MetricDefinition, lam=None):
        self.curve = curve
        self.m = m
        self.lam = lam
        self.npts = curve.grid.size
        self.n = curve.dim
        self._frames: list[ConnectionFrame | None] = [None] * self.npts
        self._tables: dict[str, np.ndarray] = {}

    def frame(self, k: int) -> ConnectionFrame:
        fr = self._frames[k]
        if fr is None:
            sample = TangentSample(self.curve.positions[k], self.curve.velocities[k])
            if not self.m.admissible(sample):
                raise InadmissibleSample(
                    f"curve leaves the domain of {self.m.name!r} "
                    f"at t={self.curve.grid[k]!r}")
            fr = ConnectionFrame(self.m, sample, order=4)
            self._frames[k] = fr
        return fr

    def _table(self, key: str, build) -> np.ndarray:
        tab = self._tables.get(key)
        if tab is None:
            tab = np.array([build(k) for k in range(self.npts)])
            self._tables[key] = tab
        return tab

    @property
    def g(self) -> np.ndarray:
        return self._table("g", lambda k: self.frame(k).g())

    @property
    def gamma(self) -> np.ndarray:
        return self._table("gamma", lambda k: self.frame(k).christoffel())

    @property
    def jacobi(self) -> np.ndarray:
        return self._table("jacobi", lambda k: self.frame(k).jacobi_matrix())

    @property
    def lam_values(self) -> np.ndarray:
        tab = self._tables.get("lam_values")
        if tab is None:
            tab = factor_values(self.lam, self.curve)
            self._tables["lam_values"] = tab
        return tab

    @property
    def lam_rate(self) -> np.ndarray:
        tab = self._tables.get("lam_rate")
        if tab is None:
            tab = factor_rate(self.lam, self.curve)
            self._tables["lam_rate"] = tab
        return tab

    def _factor_partials(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        jet = self.lam.jet(
            TangentSample(self.curve.positions[k], self.curve.velocities[k]), 2)
        dx = np.array([jet.derivative(tuple(1 if q == i else 0 for q in range(2 * n)))
                       for i in range(n)])
        dy = np.array([jet.derivative(tuple(1 if q == n + i else 0 for q in range(2 * n)))
                       for i in range(n)])
        return dx, dy

    def _build_gradients(self) -> None:
        gh = np.zeros((self.npts, self.n))
        gv = np.zeros((self.npts, self.n))
        if isinstance(self.lam, MetricDefinition):
            for k in range(self.npts):
                fr = self.frame(k)
                dx, dy = self._factor_partials(k)
                ginv = fr.ginv()
                gv[k] = ginv @ dy
                gh[k] = ginv @ (dx - fr.nonlinear().T @ dy)
        self._tables["grad_h"] = gh
        self._tables["grad_v"] = gv

    @property
    def grad_h(self) -> np.ndarray:
        if "grad_h" not in self._tables:
            self._build_gradients()
        return self._tables["grad_h"]

    @property
    def grad_v(self) -> np.ndarray:
        if "grad_v" not in self._tables:
            self._build_gradients()
        return self._tables["grad_v"]

    # -- field calculus ------------------------------------------------------

    def pair(self, U: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Nodewise g(U, W)."""
        return np.einsum("kij,ki,kj->k", self.g, U, W)

    def cov(self, X: np.ndarray, X_dot: np.ndarray | None = None) -> np.ndarray:
        """Covariant derivative of node samples along the curve."""
        X = np.asarray(X, dtype=float)
        if X.shape != (self.npts, self.n):
            raise GridMismatch("field samples must match the curve grid")
        if X_dot is None:
            X_dot = spline_derivative(self.curve.grid, X)
        return X_dot + np.einsum("kaij,ki,kj->ka", self.gamma, X, self.curve.velocities)

    def cov_scalar_times_velocity(self, f: np.ndarray) -> np.ndarray:
        """D(f * velocity) using the exact node accelerations for the
        velocity part and a spline derivative for the scalar."""
        f = np.asarray(f, dtype=float)
        f_dot = spline_derivative(self.curve.grid, f)
        X = f[:, None] * self.curve.velocities
        X_dot = (f_dot[:, None] * self.curve.velocities
                 + f[:, None] * self.curve.accelerations)
        return self.cov(X, X_dot)


def _require_lightlike(curve: DiscreteCurve, m: MetricDefinition) -> None:
    defect = lightlike_defect(curve, m)
    if defect > LIGHTLIKE_TOL:
        raise ValueError(f"curve is not lightlike: normalized |L| reaches {defect:.3e}")


# --------------------------------------------------------------------------
# first and second variation of the scaled energy
# --------------------------------------------------------------------------

def first_variation(curve: DiscreteCurve, W: VariationField, lam,
                    m: MetricDefinition, geometry: CurveGeometry | None = None
                    ) -> float:
    """Derivative of the scaled energy along the variation field W.

    Valid for lightlike base curves: integral of g(W, -D(factor*vel)) plus
    the boundary pairing factor * g(vel, W)."""
    _require_lightlike(curve, m)
    ctx = geometry or CurveGeometry(curve, m, lam)
    if W.values.shape != curve.positions.shape:
        raise GridMismatch("variation field must match the curve grid")
    lam_v = ctx.lam_values
    DZ = ctx.cov_scalar_times_velocity(lam_v)
    integrand = ctx.pair(W.values, -DZ)
    total = float(simpson(integrand, x=curve.grid))
    boundary = lam_v * ctx.pair(curve.velocities, W.values)
    return total + float(boundary[-1] - boundary[0])


def second_variation(curve: DiscreteCurve, W: VariationField, lam,
                     m: MetricDefinition, geometry: CurveGeometry | None = None
                     ) -> float:
    """Second derivative of the scaled energy along the variation.

    Requires the curve to satisfy the scaled geodesic equation; the result
    uses the transverse acceleration samples of W for the boundary term
    (absent samples mean a geodesic-transversal variation, a = 0)."""
    _require_lightlike(curve, m)
    ctx = geometry or CurveGeometry(curve, m, lam)
    lam_v = ctx.lam_values
    Wv = W.values
    Wp = ctx.cov(Wv)
    vel = curve.velocities
    # g(R(vel, W)W, vel) = -g(AW, W) via self-adjointness of the operator
    AW = np.einsum("kij,kj->ki", ctx.jacobi, Wv)
    curvature_term = ctx.pair(AW, Wv)
    integrand = lam_v * (curvature_term + ctx.pair(Wp, Wp))
    integrand += 2.0 * ctx.pair(Wp, vel) * (
        np.einsum("kij,ki,kj->k", ctx.g, Wv, ctx.grad_h)
        + np.einsum("kij,ki,kj->k", ctx.g, Wp, ctx.grad_v))
    total = float(simpson(integrand, x=curve.grid))
    if W.accel is not None:
        boundary = lam_v * ctx.pair(W.accel, vel)
        total += float(boundary[-1] - boundary[0])
    return total


def energy_derivative_fd(curve: DiscreteCurve, W: VariationField, lam,
                         m: MetricDefinition, order: int = 1,
                         step: float = 1e-3) -> float:
    """Richardson finite difference of s -> energy of the chart variation
    x(t) + s W(t).  Independent of the variation formulas: it only uses the
    energy quadrature."""
    from .geodesics import energy as _energy

    grid = curve.grid
    W_dot = spline_derivative(grid, W.values)

    def shifted(s: float) -> DiscreteCurve:
        pos = curve.positions + s * W.values
        vel = curve.velocities + s * W_dot
        return DiscreteCurve(grid, pos, vel, np.zeros_like(pos))

    def E(s: float) -> float:
        return _energy(shifted(s), m, lam)

    if order == 1:
        d1 = (E(step) - E(-step)) / (2 * step)
        d2 = (E(step / 2) - E(-step / 2)) / step
        return (4.0 * d2 - d1) / 3.0
    if order == 2:
        e0 = E(0.0)
        s1 = (E(step) - 2 * e0 + E(-step)) / step ** 2
        s2 = (E(step / 2) - 2 * e0 + E(-step / 2)) / (step / 2) ** 2
        return (4.0 * s2 - s1) / 3.0
    raise ValueError("order must be 1 or 2")


# --------------------------------------------------------------------------
# second fundamental forms
# --------------------------------------------------------------------------

def _as_field(N, u0):
    if callable(N):
        return N
    N = np.asarray(N, dtype=float)
    return lambda u: N


def _tangent_projector(B: np.ndarray, g: np.ndarray):
    """Returns tan(), the g-orthogonal projection onto span(B)."""
    if B.shape[1] == 0:
        return lambda z: np.zeros_like(z)
    gram = B.T @ g @ B
    scale = max(np.abs(gram).max(), 1e-300)
    if abs(np.linalg.det(gram)) <= 1e-10 * scale ** B.shape[1]:
        raise FinslabError("the metric restricted to the patch is degenerate")
    gram_inv = np.linalg.inv(gram)

    def tan(z):
        return B @ (gram_inv @ (B.T @ (g @ z)))

    return tan


def _patch_frame(P: SubmanifoldPatch, N0: np.ndarray, m: MetricDefinition,
                 orthogonality_tol: float = 1e-6):
    p = P.point()
    basis = P.tangent_basis()
    sample = TangentSample(p, N0)
    frame = ConnectionFrame(m, sample, order=3)
    g = frame.g()
    for a in range(basis.shape[1]):
        pairing = float(N0 @ g @ basis[:, a])
        if abs(pairing) > orthogonality_tol * max(1.0, float(N0 @ N0)):
            raise FinslabError(
                f"reference vector is not normal to the patch: pairing {pairing:.3e}")
    return p, basis, frame, g


def second_fundamental_form(P: SubmanifoldPatch, N, U, W, m: MetricDefinition
                            ) -> np.ndarray:
    """Normal part of the patch derivative of a tangent field: the bilinear
    form measuring how the patch curves away from its tangent plane.

    U and W are tangent vectors at the basepoint, given in chart components;
    W is extended with constant coefficients in the coordinate frame of the
    patch."""
    N_fn = _as_field(N, P.basepoint)
    N0 = np.asarray(N_fn(P.basepoint), dtype=float)
    p, basis, frame, g = _patch_frame(P, N0, m)
    tan = _tangent_projector(basis, g)
    u_coeff = _tangent_coefficients(basis, U)
    w_coeff = _tangent_coefficients(basis, W)
    second = P.second_derivatives()
    dW = np.einsum("nab,a,b->n", second, u_coeff, w_coeff)
    gamma = frame.christoffel()
    full = dW + np.einsum("kij,i,j->k", gamma,
                          basis @ u_coeff, basis @ w_coeff)
    return full - tan(full)


def normal_second_fundamental_form(P: SubmanifoldPatch, N, U,
                                   m: MetricDefinition) -> np.ndarray:
    """Tangential part of the patch derivative of the normal field."""
    N_fn = _as_field(N, P.basepoint)
    N0 = np.asarray(N_fn(P.basepoint), dtype=float)
    p, basis, frame, g = _patch_frame(P, N0, m)
    tan = _tangent_projector(basis, g)
    u_coeff = _tangent_coefficients(basis, U)
    dN = _param_jacobian(N_fn, P.basepoint) @ u_coeff
    gamma = frame.christoffel()
    full = dN + np.einsum("kij,i,j->k", gamma, basis @ u_coeff, N0)
    return tan(full)


def _tangent_coefficients(basis: np.ndarray, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if basis.shape[1] == 0:
        if np.linalg.norm(v) > 1e-6:
            raise FinslabError("nonzero vector cannot be tangent to a point")
        return np.zeros(0)
    coeff, *_ = np.linalg.lstsq(basis, v, rcond=None)
    if np.linalg.norm(basis @ coeff - v) > 1e-6 * max(1.0, np.linalg.norm(v)):
        raise FinslabError("vector is not tangent to the patch")
    return coeff


def _normal_sff_matrix(P: SubmanifoldPatch, N0: np.ndarray, m: MetricDefinition
                       ) -> np.ndarray:
    """(n, d) columns: the normal second fundamental form applied to each
    coordinate tangent basis vector, computed without extending the normal.

    Uses compatibility of the connection plus normality of N along the
    patch: g_N(S(U), b) = -g_N(N, D_U b) for tangent frame fields b."""
    p, basis, frame, g = _patch_frame(P, N0, m)
    d = basis.shape[1]
    if d == 0:
        return np.zeros((p.size, 0))
    second = P.second_derivatives()
    gamma = frame.christoffel()
    gram = basis.T @ g @ basis
    out = np.empty((p.size, d))
    for a in range(d):
        rhs = np.empty(d)
        for b in range(d):
            covariant = second[:, a, b] + np.einsum(
                "kij,i,j->k", gamma, basis[:, a], basis[:, b])
            rhs[b] = -float(N0 @ g @ covariant)
        out[:, a] = basis @ np.linalg.solve(gram, rhs)
    return out


# --------------------------------------------------------------------------
# index form
# --------------------------------------------------------------------------

def index_form(curve: DiscreteCurve, V: VariationField, W: VariationField,
               P: SubmanifoldPatch | None, Q: SubmanifoldPatch | None,
               lam, m: MetricDefinition,
               geometry: CurveGeometry | None = None) -> float:
    """Symmetric bilinear form whose kernel (on endpoint-constrained fields)
    is the space of endpoint-respecting Jacobi fields of the scaled metric."""
    _require_lightlike(curve, m)
    ctx = geometry or CurveGeometry(curve, m, lam)
    lam_v = ctx.lam_values
    vel = curve.velocities
    Vv, Wv = V.values, W.values
    _check_endpoint_tangency(P, Vv[0], Wv[0])
    _check_endpoint_tangency(Q, Vv[-1], Wv[-1])
    Vp = ctx.cov(Vv)
    Wp = ctx.cov(Wv)
    AV = np.einsum("kij,kj->ki", ctx.jacobi, Vv)
    integrand = lam_v * (ctx.pair(AV, Wv) + ctx.pair(Vp, Wp))
    integrand += (ctx.pair(Vp, vel) * ctx.pair(Wv, ctx.grad_h)
                  + ctx.pair(Wp, vel) * ctx.pair(Vv, ctx.grad_h))
    integrand += (ctx.pair(Vp, vel) * ctx.pair(Wp, ctx.grad_v)
                  + ctx.pair(Wp, vel) * ctx.pair(Vp, ctx.grad_v))
    total = float(simpson(integrand, x=curve.grid))
    if Q is not None and Q.d > 0:
        S = second_fundamental_form(Q, vel[-1], Vv[-1], Wv[-1], m)
        total += lam_v[-1] * float(S @ ctx.g[-1] @ vel[-1])
    if P is not None and P.d > 0:
        S = second_fundamental_form(P, vel[0], Vv[0], Wv[0], m)
        total -= lam_v[0] * float(S @ ctx.g[0] @ vel[0])
    return total


def _check_endpoint_tangency(patch, *vectors) -> None:
    if patch is None:
        return
    basis = patch.tangent_basis()
    for v in vectors:
        _tangent_coefficients(basis, v)


# --------------------------------------------------------------------------
# Jacobi field integration
# --------------------------------------------------------------------------

def _geodesic_spot_check(curve: DiscreteCurve, m: MetricDefinition,
                         tol: float = 1e-4) -> None:
    idx = np.linspace(0, curve.grid.size - 1, 5).astype(int)
    for k in idx:
        sample = TangentSample(curve.positions[k], curve.velocities[k])
        gamma = ConnectionFrame(m, sample, order=3).christoffel()
        dv = curve.accelerations[k] + np.einsum(
            "kij,i,j->k", gamma, curve.velocities[k], curve.velocities[k])
        scale = max(1.0, float(curve.velocities[k] @ curve.velocities[k]))
        if np.linalg.norm(dv) > tol * scale:
            raise ValueError(
                f"curve is not a geodesic of {m.name!r}: residual "
                f"{np.linalg.norm(dv):.3e} at t={curve.grid[k]!r}")


def integrate_jacobi_basis(curve: DiscreteCurve, m: MetricDefinition,
                           J0: np.ndarray, K0: np.ndarray,
                           validate: bool = True) -> list[JacobiSolution]:
    """RK4 integration of D^2 J = A J for several initial pairs at once.

    J0, K0 are (n, nfields); the connection frames at each RK stage are
    shared between all fields.  Returns one solution record per column.
    """
    if validate:
        _geodesic_spot_check(curve, m)
    grid = curve.grid
    n = curve.dim
    J = np.asarray(J0, dtype=float).reshape(n, -1).copy()
    K = np.asarray(K0, dtype=float).reshape(n, -1).copy()
    nf = J.shape[1]
    npts = grid.size
    Js = np.empty((npts, n, nf))
    Ks = np.empty((npts, n, nf))
    Jdots = np.empty((npts, n, nf))

    def rhs(t, J, K):
        x = curve.position(t)
        y = curve.velocity(t)
        fr = ConnectionFrame(m, TangentSample(x, y), order=4)
        gamma_y = np.einsum("kij,j->ki", fr.christoffel(), y)
        J_dot = K - gamma_y @ J
        K_dot = fr.jacobi_matrix() @ J - gamma_y @ K
        return J_dot, K_dot

    Js[0], Ks[0] = J, K
    Jdots[0] = rhs(grid[0], J, K)[0]
    for idx in range(npts - 1):
        t, h = grid[idx], grid[idx + 1] - grid[idx]
        j1, k1 = rhs(t, J, K)
        j2, k2 = rhs(t + 0.5 * h, J + 0.5 * h * j1, K + 0.5 * h * k1)
        j3, k3 = rhs(t + 0.5 * h, J + 0.5 * h * j2, K + 0.5 * h * k2)
        j4, k4 = rhs(t + h, J + h * j3, K + h * k3)
        J = J + (h / 6.0) * (j1 + 2 * j2 + 2 * j3 + j4)
        K = K + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        Js[idx + 1], Ks[idx + 1] = J, K
        Jdots[idx + 1] = rhs(grid[idx + 1], J, K)[0]
    return [JacobiSolution(grid, Js[:, :, f], Ks[:, :, f], Jdots[:, :, f])
            for f in range(nf)]


def integrate_jacobi(curve: DiscreteCurve, m: MetricDefinition, J0, K0,
                     validate: bool = True) -> JacobiSolution:
    """Single Jacobi field along a geodesic of m."""
    sol = integrate_jacobi_basis(
        curve, m, np.asarray(J0, float)[:, None], np.asarray(K0, float)[:, None],
        validate=validate)
    return sol[0]


# --------------------------------------------------------------------------
# focal point detection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FocalPoint:
    parameter: float
    multiplicity: int


def _focal_initial_data(curve: DiscreteCurve, P: SubmanifoldPatch,
                        m: MetricDefinition) -> tuple[np.ndarray, np.ndarray]:
    n = curve.dim
    N0 = curve.velocities[0]
    p = P.point()
    if np.linalg.norm(p - curve.positions[0]) > 1e-8 * max(1.0, np.linalg.norm(p)):
        raise FinslabError("patch basepoint does not match the curve start")
    basis = P.tangent_basis()
    d = basis.shape[1]
    J0 = np.zeros((n, n))
    K0 = np.zeros((n, n))
    if d > 0:
        sff = _normal_sff_matrix(P, N0, m)
        J0[:, :d] = basis
        K0[:, :d] = sff
    g = ConnectionFrame(m, TangentSample(p, N0), order=3).g()
    if d > 0:
        complement = null_space(basis.T @ g)
    else:
        complement = np.eye(n)
    if complement.shape[1] != n - d:
        raise FinslabError("could not build a complement of the patch tangent space")
    K0[:, d:] = complement
    return J0, K0


def find_focal_points(curve: DiscreteCurve, P: SubmanifoldPatch,
                      m: MetricDefinition, svd_tol: float = 1e-7,
                      refine_tol: float = 1e-8,
                      validate: bool = True) -> list[FocalPoint]:
    """Zeros (with multiplicity) of the endpoint-constrained Jacobi family.

    Integrates the n-dimensional solution family fixed by the patch data:
    d fields starting on the tangent basis with derivative matching the
    normal second fundamental form, and n-d fields vanishing initially with
    derivatives spanning a metric-orthogonal complement.  Focal parameters
    are bracketed by sign changes of det M(t) at grid resolution and refined
    by bisection on the dense output; multiplicity is the count of singular
    values below svd_tol times the largest.
    """
    J0, K0 = _focal_initial_data(curve, P, m)
    sols = integrate_jacobi_basis(curve, m, J0, K0, validate=validate)
    npts = curve.grid.size
    n = curve.dim
    M = np.empty((npts, n, n))
    Mdot = np.empty((npts, n, n))
    for f, sol in enumerate(sols):
        M[:, :, f] = sol.J
        Mdot[:, :, f] = sol.J_dot
    spline = CubicHermiteSpline(curve.grid, M, Mdot, axis=0)
    dets = np.array([np.linalg.det(M[k]) for k in range(npts)])
    out: list[FocalPoint] = []
    for k in range(1, npts - 1):
        a, b = dets[k], dets[k + 1]
        if a == 0.0:
            t_star = float(curve.grid[k])
        elif a * b < 0.0:
            lo, hi = float(curve.grid[k]), float(curve.grid[k + 1])
            flo = a
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                fmid = float(np.linalg.det(spline(mid)))
                if fmid == 0.0:
                    lo = hi = mid
                    break
                if flo * fmid < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            t_star = 0.5 * (lo + hi)
        else:
            continue
        sv = np.linalg.svd(spline(t_star), compute_uv=False)
        multiplicity = int(np.sum(sv <= svd_tol * sv[0]))
        if multiplicity > 0:
            out.append(FocalPoint(parameter=t_star, multiplicity=multiplicity))
    return out


# --------------------------------------------------------------------------
# transfer of Jacobi fields through a conformal change
# --------------------------------------------------------------------------

def transfer_jacobi(Jsol: JacobiSolution, curve: DiscreteCurve,
                    rep: Reparametrization, lam, m: MetricDefinition,
                    geometry: CurveGeometry | None = None
                    ) -> tuple[JacobiSolution, np.ndarray]:
    """Carry a Jacobi field of the reparametrized curve back to the scaled
    parametrization, correcting by a multiple of the velocity.

    The correction solves hdd = -sdot/factor + s*factor_rate/factor^2 with
    h = 0 at both ends, where s pairs the field with the factor gradients.
    Returns the corrected solution and the h samples (zero at both ends by
    construction)."""
    ctx = geometry or CurveGeometry(curve, m, lam)
    grid = curve.grid
    mu = rep.inverse(grid)
    mu[0], mu[-1] = Jsol.grid[0], Jsol.grid[-1]
    J_spline = Jsol.spline()
    K_spline = CubicHermiteSpline(
        Jsol.grid, Jsol.K, spline_derivative(Jsol.grid, Jsol.K), axis=0)
    lam_v = ctx.lam_values
    lam_r = ctx.lam_rate
    J = J_spline(mu)
    K = K_spline(mu) / lam_v[:, None]
    s = (np.einsum("kij,ki,kj->k", ctx.g, J, ctx.grad_h)
         + np.einsum("kij,ki,kj->k", ctx.g, K, ctx.grad_v))
    s_dot = spline_derivative(grid, s)
    forcing = -s_dot / lam_v + s * lam_r / lam_v ** 2
    q = cumulative_simpson(forcing, x=grid, initial=0.0)
    H = cumulative_simpson(q, x=grid, initial=0.0)
    span = grid[-1] - grid[0]
    h = H - (grid - grid[0]) * (H[-1] / span)
    h[0] = 0.0
    h[-1] = 0.0
    h_dot = q - H[-1] / span
    vel = curve.velocities
    J_hat = J + h[:, None] * vel
    # D(h*vel) = hdot*vel + h*Dvel with Dvel = -(factor_rate/factor)*vel
    K_hat = K + (h_dot - h * lam_r / lam_v)[:, None] * vel
    gamma_y = np.einsum("kaij,kj->kai", ctx.gamma, vel)
    J_hat_dot = K_hat - np.einsum("kai,ki->ka", gamma_y, J_hat)
    return JacobiSolution(grid, J_hat, K_hat, J_hat_dot), h


def conformal_jacobi_residual(curve: DiscreteCurve, sol: JacobiSolution,
                              lam, m: MetricDefinition,
                              geometry: CurveGeometry | None = None,
                              trim: int = 2) -> float:
    """Interior residual of the scaled-metric Jacobi characterization,
    written entirely with the base connection:

        factor*A V - (factor*V')' + g(V',vel)*grad_h
        - (g(V,grad_h)*vel)' - (g(V',vel)*grad_v)' - (g(V',grad_v)*vel)' = 0
    """
    ctx = geometry or CurveGeometry(curve, m, lam)
    grid = curve.grid
    lam_v = ctx.lam_values
    V = sol.J
    Vp = sol.K
    vel = curve.velocities
    AV = np.einsum("kij,kj->ki", ctx.jacobi, V)
    lamVp = lam_v[:, None] * Vp
    term2 = ctx.cov(lamVp)
    vp_vel = ctx.pair(Vp, vel)
    term3 = vp_vel[:, None] * ctx.grad_h
    term4 = ctx.cov_scalar_times_velocity(ctx.pair(V, ctx.grad_h))
    term5 = ctx.cov(vp_vel[:, None] * ctx.grad_v)
    term6 = ctx.cov_scalar_times_velocity(ctx.pair(Vp, ctx.grad_v))
    residual = (lam_v[:, None] * AV - term2 + term3 - term4 - term5 - term6)
    lo, hi = trim, grid.size - trim
    return float(np.max(np.linalg.norm(residual[lo:hi], axis=1)))


def boundary_residual(curve: DiscreteCurve, sol: JacobiSolution,
                      P: SubmanifoldPatch | None, Q: SubmanifoldPatch | None,
                      lam, m: MetricDefinition,
                      geometry: CurveGeometry | None = None) -> float:
    """Endpoint residual of the scaled-metric endpoint conditions, tested
    against every tangent basis vector of the end patches:

        factor * g(V' - S(V), w) + g(V', vel) * g(grad_v, w) = 0.
    """
    ctx = geometry or CurveGeometry(curve, m, lam)
    worst = 0.0
    for patch, k in ((P, 0), (Q, curve.grid.size - 1)):
        if patch is None or patch.d == 0:
            continue
        basis = patch.tangent_basis()
        coeffs = _tangent_coefficients(basis, sol.J[k])
        sff = _normal_sff_matrix(patch, curve.velocities[k], m)
        SV = sff @ coeffs
        lead = ctx.lam_values[k]
        extra = float(sol.K[k] @ ctx.g[k] @ curve.velocities[k])
        for a in range(basis.shape[1]):
            w = basis[:, a]
            r = (lead * float((sol.K[k] - SV) @ ctx.g[k] @ w)
                 + extra * float(ctx.grad_v[k] @ ctx.g[k] @ w))
            worst = max(worst, abs(r))
    return worst


# --------------------------------------------------------------------------
# the focal correspondence experiment
# --------------------------------------------------------------------------

@dataclass
class CorrespondencePair:
    base_parameter: float
    base_multiplicity: int
    scaled_parameter: float | None
    scaled_multiplicity: int | None
    pairing_error: float | None


@dataclass
class CorrespondenceReport:
    base_focal: list[FocalPoint]
    scaled_focal: list[FocalPoint]
    pairs: list[CorrespondencePair] = field(default_factory=list)
    matched: bool = False
    tolerance: float = 1e-4


def verify_focal_correspondence(curve: DiscreteCurve, P: SubmanifoldPatch,
                                lam, m: MetricDefinition,
                                scaled: MetricDefinition | None = None,
                                tolerance: float = 1e-4
                                ) -> CorrespondenceReport:
    """Detect focal points of a scaled-metric lightlike geodesic twice: once
    directly, once on its reparametrization under the base metric, and match
    the parameter lists through the reparametrization map.

    A failed match is reported, not raised."""
    if scaled is None:
        from .conformal import scale_metric
        if not isinstance(lam, MetricDefinition):
            raise ValueError("a factor definition is needed to build the scaled metric")
        scaled, _ = scale_metric(m, lam, sample_budget=8)
    rep, tilde = reparametrize_conformal(curve, lam, m)
    base_focal = find_focal_points(tilde, P, m)
    scaled_focal = find_focal_points(curve, P, scaled)
    report = CorrespondenceReport(base_focal=base_focal, scaled_focal=scaled_focal,
                                  tolerance=tolerance)
    available = list(scaled_focal)
    all_ok = True
    for fp in base_focal:
        target = float(rep(fp.parameter))
        best = None
        for cand in available:
            err = abs(cand.parameter - target)
            if best is None or err < best[1]:
                best = (cand, err)
        if best is not None and best[1] <= tolerance:
            cand, err = best
            available.remove(cand)
            ok = cand.multiplicity == fp.multiplicity
            report.pairs.append(CorrespondencePair(
                fp.parameter, fp.multiplicity, cand.parameter,
                cand.multiplicity, err))
            all_ok = all_ok and ok
        else:
            report.pairs.append(CorrespondencePair(
                fp.parameter, fp.multiplicity, None, None, None))
            all_ok = False
    report.matched = all_ok and not available
    return report
