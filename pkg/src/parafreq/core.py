"""Weighted model geometries, grid fields, and the weighted measure structure.

Everything downstream (operators, flows, frequency traces) consumes the
quadrature measure ``mu`` and the gradient structure defined here.  Periodic
kinds carry an edge list with midpoint-interpolated weights so that the
summation-by-parts identity holds exactly; the Gauss line carries a
collocation basis in which the drift operator is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import IncompatibleFieldsError, InvalidInputError

CIRCLE = "circle"
TORUS = "torus2d"
GAUSS_LINE = "gauss-line"

PROVENANCE_SPECTRAL = "spectral-exact"
PROVENANCE_IMPLICIT = "implicit-step"
PROVENANCE_ANALYTIC = "analytic-oracle"


def _as_node_array(values, nodes: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(values, dtype=float), (nodes,)).copy()
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite at every node")
    return arr


@dataclass(frozen=True)
class _PeriodicStencil:
    """Edge structure of a periodic grid.

    ``edge_coef[e]`` multiplies ``(u[j] - u[i])**2`` in the Dirichlet energy;
    it already contains the cell volume, the midpoint weight ``exp(-phi_mid)``
    and the ``1/h**2`` factor.  ``shape``/``spacings`` drive the centered
    nodal gradient.
    """

    shape: tuple[int, ...]
    spacings: tuple[float, ...]
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_coef: np.ndarray


@dataclass(frozen=True)
class _SpectralBasis:
    """Collocation basis on the Gauss line.

    Columns of ``basis`` are mu-orthonormal polynomial eigenfunctions of the
    drift operator; ``rates[k] = -k/2`` are the matching eigenvalues and
    ``deriv`` differentiates in coefficient space.
    """

    basis: np.ndarray
    rates: np.ndarray
    deriv: np.ndarray


@dataclass(frozen=True)
class WeightedGeometry:
    """A discretized weighted model geometry.

    ``mu`` is the positive quadrature measure representing
    ``exp(-phi) dvol_g`` (with the conformal volume ``exp(2*psi) dx dy`` baked
    in for the torus).  Instances are immutable after construction.
    """

    kind: str
    coords: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    dim: int
    stencil: _PeriodicStencil | None = None
    basis: _SpectralBasis | None = None

    def __post_init__(self):
        for arr in (self.coords, self.phi, self.psi, self.mu):
            arr.setflags(write=False)
        if np.any(self.mu <= 0.0):
            raise InvalidInputError("measure entries must be strictly positive")

    @property
    def node_count(self) -> int:
        return self.coords.shape[0]

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Nodal gradient of per-node data, shape (nodes, dim, N).

        Periodic kinds average the two adjacent edge-midpoint differences
        (equivalently, a centered difference); the Gauss line differentiates
        in the collocation basis.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        n_comp = values.shape[1]
        if self.basis is not None:
            coef = self.basis.basis.T @ (self.mu[:, None] * values)
            out = (self.basis.basis @ (self.basis.deriv @ coef))[:, None, :]
        else:
            shape = self.stencil.shape
            out = np.empty((self.node_count, self.dim, n_comp))
            grid = values.reshape(shape + (n_comp,))
            for axis, h in enumerate(self.stencil.spacings):
                diff = np.roll(grid, -1, axis=axis) - np.roll(grid, 1, axis=axis)
                out[:, axis, :] = diff.reshape(self.node_count, n_comp) / (2.0 * h)
        return out

    def energy_pairing(self, u_values: np.ndarray, v_values: np.ndarray) -> float:
        """Discrete weighted Dirichlet pairing; equals ``-<u, L v>_mu`` exactly."""
        u_values = np.asarray(u_values, dtype=float)
        v_values = np.asarray(v_values, dtype=float)
        if u_values.ndim == 1:
            u_values = u_values[:, None]
        if v_values.ndim == 1:
            v_values = v_values[:, None]
        if self.basis is not None:
            a = self.basis.basis.T @ (self.mu[:, None] * u_values)
            b = self.basis.basis.T @ (self.mu[:, None] * v_values)
            return float(np.sum((-self.basis.rates)[:, None] * a * b))
        st = self.stencil
        du = u_values[st.edge_j] - u_values[st.edge_i]
        dv = v_values[st.edge_j] - v_values[st.edge_i]
        return float(np.sum(st.edge_coef[:, None] * du * dv))

    def energy_batch(self, stack: np.ndarray) -> np.ndarray:
        """Dirichlet energies of a (samples, nodes, N) stack of field values."""
        if self.basis is not None:
            coeffs = np.einsum(
                "nk,snc->skc", self.basis.basis, self.mu[None, :, None] * stack
            )
            return np.einsum("k,skc->s", -self.basis.rates, coeffs**2)
        st = self.stencil
        du = stack[:, st.edge_j, :] - stack[:, st.edge_i, :]
        return np.einsum("sec,e,sec->s", du, st.edge_coef, du)

    @cached_property
    def length_scale(self) -> float:
        """Largest grid spacing; zero for the spectrally exact Gauss line."""
        if self.stencil is None:
            return 0.0
        return max(self.stencil.spacings)


@dataclass(frozen=True)
class Field:
    """An R^N-valued grid function on a fixed geometry."""

    geometry: WeightedGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.geometry.node_count:
            raise InvalidInputError(
                f"field values must have shape (nodes, N); got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def components(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def constant(geometry: WeightedGeometry, value: float = 1.0, components: int = 1) -> "Field":
        return Field(geometry, np.full((geometry.node_count, components), value))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time samples on [a, b]."""

    a: float
    b: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise InvalidInputError("time window requires a < b")
        if self.steps < 1:
            raise InvalidInputError("steps must be a positive integer")

    @property
    def dt(self) -> float:
        return (self.b - self.a) / self.steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(self.a, self.b, self.steps + 1)
        t.setflags(write=False)
        return t


@dataclass(frozen=True)
class Trajectory:
    """A time-indexed sequence of fields produced by one integrator."""

    grid: TimeGrid
    fields: tuple[Field, ...]
    provenance: str
    gradient_only: bool = False
    certified_bound: np.ndarray | None = None

    def __post_init__(self):
        if len(self.fields) != self.grid.steps + 1:
            raise InvalidInputError("trajectory must hold one field per time sample")
        geom = self.fields[0].geometry
        n_comp = self.fields[0].components
        for f in self.fields:
            if f.geometry is not geom or f.components != n_comp:
                raise IncompatibleFieldsError(
                    "all trajectory fields must share one geometry and one N"
                )
        if self.provenance not in (
            PROVENANCE_SPECTRAL,
            PROVENANCE_IMPLICIT,
            PROVENANCE_ANALYTIC,
        ):
            raise InvalidInputError(f"unknown provenance {self.provenance!r}")

    @property
    def geometry(self) -> WeightedGeometry:
        return self.fields[0].geometry


def make_circle(nodes: int, length: float, phi=0.0) -> WeightedGeometry:
    """Periodic uniform grid on a circle of the given length.

    The quadrature weight is ``mu_i = h * exp(-phi_i)`` (trapezoid rule on a
    periodic grid); edge weights interpolate phi linearly to the midpoint.
    """
    if nodes < 4:
        raise InvalidInputError("circle needs at least 4 nodes")
    if not (np.isfinite(length) and length > 0.0):
        raise InvalidInputError("length must be a positive real")
    h = length / nodes
    x = h * np.arange(nodes)
    phi_arr = _as_node_array(phi, nodes, "phi")
    mu = h * np.exp(-phi_arr)
    idx = np.arange(nodes)
    nxt = (idx + 1) % nodes
    phi_mid = 0.5 * (phi_arr[idx] + phi_arr[nxt])
    stencil = _PeriodicStencil(
        shape=(nodes,),
        spacings=(h,),
        edge_i=idx,
        edge_j=nxt,
        edge_coef=np.exp(-phi_mid) / h,
    )
    return WeightedGeometry(
        kind=CIRCLE,
        coords=x[:, None],
        phi=phi_arr,
        psi=np.zeros(nodes),
        mu=mu,
        dim=1,
        stencil=stencil,
    )


def make_torus(nx: int, ny: int, lx: float, ly: float, phi=0.0, psi=0.0) -> WeightedGeometry:
    """Flat torus with conformal metric ``exp(2*psi) * (dx^2 + dy^2)``.

    The measure bakes in the conformal area element:
    ``mu = hx*hy*exp(2*psi - phi)``.  The Dirichlet energy of a conformal 2D
    metric reduces to the flat one, so edges carry ``exp(-phi_mid)`` only.
    """
    if nx < 4 or ny < 4:
        raise InvalidInputError("torus needs at least 4 nodes per direction")
    if not (np.isfinite(lx) and lx > 0.0 and np.isfinite(ly) and ly > 0.0):
        raise InvalidInputError("side lengths must be positive reals")
    hx, hy = lx / nx, ly / ny
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    coords = np.column_stack([(ix * hx).ravel(), (iy * hy).ravel()])
    nodes = nx * ny
    phi_arr = _as_node_array(phi, nodes, "phi")
    psi_arr = _as_node_array(psi, nodes, "psi")
    mu = hx * hy * np.exp(2.0 * psi_arr - phi_arr)

    flat = np.arange(nodes).reshape(nx, ny)
    ex_i, ex_j = flat.ravel(), np.roll(flat, -1, axis=0).ravel()
    ey_i, ey_j = flat.ravel(), np.roll(flat, -1, axis=1).ravel()
    edge_i = np.concatenate([ex_i, ey_i])
    edge_j = np.concatenate([ex_j, ey_j])
    phi_mid = 0.5 * (phi_arr[edge_i] + phi_arr[edge_j])
    coef = np.concatenate(
        [np.full(nodes, hy / hx), np.full(nodes, hx / hy)]
    ) * np.exp(-phi_mid)
    stencil = _PeriodicStencil(
        shape=(nx, ny),
        spacings=(hx, hy),
        edge_i=edge_i,
        edge_j=edge_j,
        edge_coef=coef,
    )
    return WeightedGeometry(
        kind=TORUS,
        coords=coords,
        phi=phi_arr,
        psi=psi_arr,
        mu=mu,
        dim=2,
        stencil=stencil,
    )


def _gauss_basis(x: np.ndarray, count: int) -> np.ndarray:
    """Orthonormal polynomial eigenbasis for the weight exp(-x^2/4).

    Built by the three-term recurrence in normalized form so large orders stay
    in range; column k is an eigenfunction with rate -k/2.
    """
    z = x / np.sqrt(2.0)
    norm = (2.0 * np.sqrt(np.pi)) ** -0.5
    basis = np.empty((x.size, count))
    basis[:, 0] = norm
    if count > 1:
        basis[:, 1] = norm * z
    for k in range(1, count - 1):
        basis[:, k + 1] = (z * basis[:, k] - np.sqrt(k) * basis[:, k - 1]) / np.sqrt(k + 1)
    return basis


def make_gauss_line(order: int) -> WeightedGeometry:
    """Gauss-quadrature line for the weight ``exp(-x^2/4) dx``.

    ``order`` collocation nodes integrate polynomials up to degree
    ``2*order - 1`` exactly.  The weight exponent is ``phi = x^2/4``.
    """
    if order < 4:
        raise InvalidInputError("gauss line needs order >= 4")
    y, w = np.polynomial.hermite.hermgauss(order)
    x = 2.0 * y
    mu = 2.0 * w
    basis = _gauss_basis(x, order)
    rates = -0.5 * np.arange(order, dtype=float)
    deriv = np.zeros((order, order))
    for k in range(1, order):
        deriv[k - 1, k] = np.sqrt(k / 2.0)
    return WeightedGeometry(
        kind=GAUSS_LINE,
        coords=x[:, None],
        phi=x**2 / 4.0,
        psi=np.zeros(order),
        mu=mu,
        dim=1,
        basis=_SpectralBasis(basis=basis, rates=rates, deriv=deriv),
    )


def _check_compatible(u: Field, v: Field) -> None:
    if u.geometry is not v.geometry:
        raise IncompatibleFieldsError("fields live on different geometries")
    if u.components != v.components:
        raise IncompatibleFieldsError("fields have different component counts")


def weighted_inner(u: Field, v: Field) -> float:
    """Weighted L2 pairing ``sum_i mu_i <u_i, v_i>``; symmetric and bilinear."""
    _check_compatible(u, v)
    return float(np.sum(u.geometry.mu[:, None] * u.values * v.values))


def weighted_norm(u: Field) -> float:
    return float(np.sqrt(max(weighted_inner(u, u), 0.0)))


def dirichlet_energy(u: Field) -> float:
    """Nonnegative weighted Dirichlet energy of a field.

    Uses the same edge-midpoint differences (or spectral pairing) as the
    operator assembly, so ``<u, L u>_mu == -dirichlet_energy(u)`` exactly in
    exact arithmetic.
    """
    return u.geometry.energy_pairing(u.values, u.values)


def energy_pairing(u: Field, v: Field) -> float:
    """Bilinear form of :func:`dirichlet_energy`."""
    _check_compatible(u, v)
    return u.geometry.energy_pairing(u.values, v.values)
