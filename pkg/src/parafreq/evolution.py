"""Time evolution of the drift heat equation and its perturbed variants.

Two integrators on purpose: the spectral path is the exact semigroup of the
semidiscrete operator (theorem-grade trajectories), the implicit trapezoid
path carries O(dt^2) stepping error (tolerance-budgeted trajectories).
Perturbations are treated explicitly with midpoint averaging; the zeroth-order
gauge is removed by an exact scalar factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg

from .core import (
    PROVENANCE_IMPLICIT,
    PROVENANCE_SPECTRAL,
    Field,
    TimeGrid,
    Trajectory,
    WeightedGeometry,
    weighted_inner,
)
from .errors import (
    CertificationFailureError,
    DegenerateInputError,
    InvalidInputError,
    NumericalFailureError,
)
from .operators import DriftOperator

_CERT_SLACK = 1e-12


def _sample_time_function(fn, times: np.ndarray, shape: tuple, name: str) -> np.ndarray:
    """Sample a callable/array/scalar onto the grid; result has ``(K+1,) + shape``."""
    out = np.empty((times.size,) + shape)
    if callable(fn):
        for k, t in enumerate(times):
            out[k] = np.broadcast_to(np.asarray(fn(t), dtype=float), shape)
    else:
        arr = np.asarray(fn, dtype=float)
        if arr.shape == (times.size,) + shape:
            out[:] = arr
        else:
            out[:] = np.broadcast_to(arr, shape)
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{name} must be finite at every sample")
    return out


@dataclass(frozen=True)
class PerturbationSpec:
    """Drift/potential perturbation ``b . grad u + c u`` with certified bound.

    The sufficient sup-norm condition ``|b|, |c| <= C(t)`` is checked at every
    sampled (node, time) pair at construction; gradient_only additionally
    requires ``c == 0``.
    """

    geometry: WeightedGeometry
    grid: TimeGrid
    b: np.ndarray | None
    c: np.ndarray | None
    bound: np.ndarray
    gradient_only: bool = False

    @staticmethod
    def build(
        geometry: WeightedGeometry,
        grid: TimeGrid,
        b=None,
        c=None,
        bound=None,
        gradient_only: bool = False,
    ) -> "PerturbationSpec":
        """Sample, certify, and freeze a perturbation on a grid.

        ``b`` maps t to per-node coefficient vectors (nodes, dim), ``c`` maps
        t to per-node scalars; either may be an array over the whole grid, a
        constant, or None.  ``bound`` is C(t); when omitted the tight sup-norm
        certificate is used.
        """
        times = grid.times
        nodes, dim = geometry.node_count, geometry.dim
        b_arr = None if b is None else _sample_time_function(b, times, (nodes, dim), "b")
        c_arr = None if c is None else _sample_time_function(c, times, (nodes,), "c")
        if gradient_only and c_arr is not None and np.any(c_arr != 0.0):
            raise InvalidInputError("gradient_only perturbations require c == 0")
        b_sup = (
            np.zeros(times.size)
            if b_arr is None
            else np.sqrt((b_arr**2).sum(axis=2)).max(axis=1)
        )
        c_sup = np.zeros(times.size) if c_arr is None else np.abs(c_arr).max(axis=1)
        if bound is None:
            bound_arr = np.maximum(b_sup, c_sup)
        else:
            bound_arr = _sample_time_function(bound, times, (), "bound")
            if np.any(bound_arr < -_CERT_SLACK):
                raise InvalidInputError("bound C(t) must be nonnegative")
            bad = (b_sup > bound_arr + _CERT_SLACK) | (c_sup > bound_arr + _CERT_SLACK)
            if np.any(bad):
                k = int(np.argmax(bad))
                raise CertificationFailureError(
                    f"perturbation exceeds its certified bound at t={times[k]:.6g}: "
                    f"sup|b|={b_sup[k]:.6g}, sup|c|={c_sup[k]:.6g}, C={bound_arr[k]:.6g}"
                )
        for arr in (b_arr, c_arr, bound_arr):
            if arr is not None:
                arr.setflags(write=False)
        return PerturbationSpec(
            geometry=geometry,
            grid=grid,
            b=b_arr,
            c=c_arr,
            bound=bound_arr,
            gradient_only=gradient_only,
        )

    def term(self, k: int, values: np.ndarray) -> np.ndarray:
        """Evaluate ``b . grad u + c u`` at time sample k."""
        out = np.zeros_like(values)
        if self.b is not None:
            grad = self.geometry.gradient(values)
            out += np.einsum("nd,ndc->nc", self.b[k], grad)
        if self.c is not None:
            out += self.c[k][:, None] * values
        return out

    def is_zero(self) -> bool:
        return (self.b is None or not np.any(self.b)) and (
            self.c is None or not np.any(self.c)
        )


@dataclass(frozen=True)
class GaugeSpec:
    """Scalar zeroth-order coefficient lambda(t), a function of time only."""

    rate: Callable[[float], float] | np.ndarray | float

    def sample(self, times: np.ndarray) -> np.ndarray:
        return _sample_time_function(self.rate, times, (), "lambda")


def _check_initial(op: DriftOperator, u0: Field) -> None:
    if u0.geometry is not op.geometry:
        raise InvalidInputError("initial field does not live on the operator geometry")
    if weighted_inner(u0, u0) == 0.0:
        raise DegenerateInputError("initial field is identically zero")


def evolve_exact(op: DriftOperator, u0: Field, grid: TimeGrid) -> Trajectory:
    """Exact semigroup of the discrete operator, computed in its eigenbasis."""
    _check_initial(op, u0)
    vals, vecs = op.eigensystem
    coeffs = vecs.T @ (op.geometry.mu[:, None] * u0.values)
    fields = []
    for t in grid.times:
        decay = np.exp(vals * (t - grid.a))
        fields.append(Field(op.geometry, vecs @ (decay[:, None] * coeffs)))
    return Trajectory(grid=grid, fields=tuple(fields), provenance=PROVENANCE_SPECTRAL)


def _imex_steps(
    op: DriftOperator, u0: Field, grid: TimeGrid, pert: PerturbationSpec | None
) -> list[np.ndarray]:
    """Trapezoidal stepping, implicit in L, midpoint-averaged in the perturbation."""
    n = op.geometry.node_count
    dt = grid.dt
    eye = np.eye(n)
    try:
        solver = scipy.sparse.linalg.splu(
            scipy.sparse.csc_matrix(eye - 0.5 * dt * op.matrix)
        )
    except RuntimeError as exc:  # pragma: no cover - L <= 0 keeps this regular
        raise NumericalFailureError(f"implicit factorization failed: {exc}") from exc
    forward = eye + 0.5 * dt * op.matrix
    values = [u0.values.copy()]
    u = u0.values.copy()
    for k in range(grid.steps):
        rhs = forward @ u
        if pert is None:
            u = solver.solve(rhs)
        else:
            p_old = pert.term(k, u)
            predictor = solver.solve(rhs + dt * p_old)
            p_mid = 0.5 * (p_old + pert.term(k + 1, predictor))
            u = solver.solve(rhs + dt * p_mid)
        values.append(u.copy())
    return values


def evolve_cn(op: DriftOperator, u0: Field, grid: TimeGrid) -> Trajectory:
    """Unconditionally stable implicit trapezoid stepping, O(dt^2) accurate."""
    _check_initial(op, u0)
    values = _imex_steps(op, u0, grid, None)
    fields = tuple(Field(op.geometry, v) for v in values)
    return Trajectory(grid=grid, fields=fields, provenance=PROVENANCE_IMPLICIT)


def evolve_perturbed(
    op: DriftOperator, u0: Field, grid: TimeGrid, pert: PerturbationSpec
) -> Trajectory:
    """Step ``u_t = L u + b . grad u + c u`` with the certified perturbation.

    The drift part is implicit, the perturbation explicit with midpoint
    averaging; the realized bound C(t_k) is recorded on the trajectory.
    """
    _check_initial(op, u0)
    if pert.geometry is not op.geometry:
        raise InvalidInputError("perturbation geometry does not match the operator")
    if pert.grid != grid:
        raise InvalidInputError("perturbation was certified on a different time grid")
    if op.geometry.psi.any() and not pert.is_zero():
        raise InvalidInputError(
            "perturbed flows are supported on flat geometries only (psi == 0)"
        )
    b_sup = (
        np.zeros(grid.times.size)
        if pert.b is None
        else np.sqrt((pert.b**2).sum(axis=2)).max(axis=1)
    )
    c_sup = np.zeros(grid.times.size) if pert.c is None else np.abs(pert.c).max(axis=1)
    if np.any(b_sup > pert.bound + _CERT_SLACK) or np.any(c_sup > pert.bound + _CERT_SLACK):
        raise CertificationFailureError("perturbation violates its certified bound")
    values = _imex_steps(op, u0, grid, pert)
    fields = tuple(Field(op.geometry, v) for v in values)
    return Trajectory(
        grid=grid,
        fields=fields,
        provenance=PROVENANCE_IMPLICIT,
        gradient_only=pert.gradient_only,
        certified_bound=pert.bound,
    )


def gauge_transform(traj: Trajectory, gauge: GaugeSpec) -> Trajectory:
    """Multiply by ``exp(-integral_a^t lambda)`` (trapezoid in time).

    If the source solves the gauged equation ``u_t = L u + lambda(t) u``, the
    result solves the pure drift heat equation; the frequency U is invariant
    either way because the scalar factor cancels in D/I.
    """
    times = traj.grid.times
    rates = gauge.sample(times)
    integral = scipy.integrate.cumulative_trapezoid(rates, times, initial=0.0)
    factors = np.exp(-integral)
    fields = tuple(
        Field(traj.geometry, factor * fld.values)
        for factor, fld in zip(factors, traj.fields)
    )
    return Trajectory(
        grid=traj.grid,
        fields=fields,
        provenance=traj.provenance,
        gradient_only=traj.gradient_only,
        certified_bound=traj.certified_bound,
    )
