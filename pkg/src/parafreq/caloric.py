"""Closed-form heat-equation oracles on R^n and the drift change of variables.

Oracles carry hand-coded evaluators for u, u_t, grad u, lap u (no automatic
differentiation).  The change of variables ``w(x, s) = u(e^{-s/2} x, -e^{-s})``
turns heat flow into Gaussian-weighted drift heat flow; its residual identity
and the scaled-frequency correspondence are verified by quadrature that is
exact on polynomial data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import Field, TimeGrid, Trajectory, PROVENANCE_ANALYTIC, WeightedGeometry
from .errors import InvalidInputError
from .reports import CheckReport, passing

ORACLE_KINDS = (
    "constant",
    "linear",
    "caloric-quadratic",
    "heat-kernel",
    "custom-polynomial",
)


@dataclass(frozen=True)
class HeatOracle:
    """Closed-form function on R^n x (t_min, 0) with consistent derivatives."""

    kind: str
    n: int
    u: Callable
    u_t: Callable
    grad: Callable
    lap: Callable
    t_min: float = -np.inf
    caloric: bool = True

    def residual(self, x: np.ndarray, t) -> np.ndarray:
        """Heat-equation defect ``u_t - lap u``; zero for caloric kinds."""
        return self.u_t(x, t) - self.lap(x, t)


def _points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != n:
        raise InvalidInputError(f"sample points must have {n} coordinates")
    return pts


def _poly_terms_1d(coeffs: np.ndarray) -> list[np.ndarray]:
    """Coefficient arrays of ``lap^j p / j!`` until the Laplacian kills p."""
    terms = [coeffs]
    j = 0
    while terms[-1].size > 2:
        j += 1
        terms.append(npoly.polyder(terms[-1], 2) / j)
    return terms


def _lap_coeffs_2d(c: np.ndarray) -> np.ndarray:
    dxx = npoly.polyder(c, 2, axis=0) if c.shape[0] > 2 else np.zeros((1, 1))
    dyy = npoly.polyder(c, 2, axis=1) if c.shape[1] > 2 else np.zeros((1, 1))
    rows = max(dxx.shape[0], dyy.shape[0])
    cols = max(dxx.shape[1], dyy.shape[1])
    out = np.zeros((rows, cols))
    out[: dxx.shape[0], : dxx.shape[1]] += dxx
    out[: dyy.shape[0], : dyy.shape[1]] += dyy
    return out


def _poly_terms_2d(coeffs: np.ndarray) -> list[np.ndarray]:
    terms = [coeffs]
    j = 0
    while np.any(_lap_coeffs_2d(terms[-1])):
        j += 1
        terms.append(_lap_coeffs_2d(terms[-1]) / j)
    return terms


def _polynomial_oracle(n: int, coeffs, complete: bool) -> HeatOracle:
    coeffs = np.asarray(coeffs, dtype=float)
    if n == 1:
        coeffs = np.atleast_1d(coeffs)
        terms = _poly_terms_1d(coeffs) if complete else [coeffs]
        d_terms = [npoly.polyder(c, 1) if c.size > 1 else np.zeros(1) for c in terms]
        l_terms = [npoly.polyder(c, 2) if c.size > 2 else np.zeros(1) for c in terms]

        def time_sum(parts, x, t, shift=0):
            xs = x[:, 0]
            t = np.asarray(t, dtype=float)
            out = np.zeros(xs.shape)
            for j, c in enumerate(parts):
                if shift and j < shift:
                    continue
                factor = j if shift else 1.0
                power = j - shift
                out += factor * np.asarray(t) ** power * npoly.polyval(xs, c)
            return out

        return HeatOracle(
            kind="custom-polynomial",
            n=1,
            u=lambda x, t: time_sum(terms, _points(x, 1), t),
            u_t=lambda x, t: time_sum(terms, _points(x, 1), t, shift=1),
            grad=lambda x, t: time_sum(d_terms, _points(x, 1), t)[:, None],
            lap=lambda x, t: time_sum(l_terms, _points(x, 1), t),
            caloric=complete or coeffs.size <= 2,
        )
    if n == 2:
        coeffs = np.atleast_2d(coeffs)
        terms = _poly_terms_2d(coeffs) if complete else [coeffs]

        def dcoef(c, axis):
            return npoly.polyder(c, 1, axis=axis) if c.shape[axis] > 1 else np.zeros((1, 1))

        dx_terms = [dcoef(c, 0) for c in terms]
        dy_terms = [dcoef(c, 1) for c in terms]
        l_terms = [_lap_coeffs_2d(c) for c in terms]

        def time_sum2(parts, x, t, shift=0):
            xs, ys = x[:, 0], x[:, 1]
            out = np.zeros(xs.shape)
            for j, c in enumerate(parts):
                if shift and j < shift:
                    continue
                factor = j if shift else 1.0
                power = j - shift
                out += factor * np.asarray(t) ** power * npoly.polyval2d(xs, ys, c)
            return out

        def grad2(x, t):
            pts = _points(x, 2)
            return np.stack(
                [time_sum2(dx_terms, pts, t), time_sum2(dy_terms, pts, t)], axis=1
            )

        return HeatOracle(
            kind="custom-polynomial",
            n=2,
            u=lambda x, t: time_sum2(terms, _points(x, 2), t),
            u_t=lambda x, t: time_sum2(terms, _points(x, 2), t, shift=1),
            grad=grad2,
            lap=lambda x, t: time_sum2(l_terms, _points(x, 2), t),
            caloric=complete or not np.any(_lap_coeffs_2d(coeffs)),
        )
    raise InvalidInputError("polynomial oracles support n in {1, 2}")


def make_oracle(kind: str, n: int = 1, params: dict | None = None) -> HeatOracle:
    """Build a closed-form oracle.

    Kinds: ``constant`` (value), ``linear`` (coeffs, offset),
    ``caloric-quadratic`` (``|x|^2 + 2 n t``), ``heat-kernel``
    (time_offset > 0, valid for t > -time_offset), and ``custom-polynomial``
    (coeffs; calorically completed unless ``complete`` is False).
    """
    params = dict(params or {})
    if n not in (1, 2):
        raise InvalidInputError("oracle dimension must be 1 or 2")
    if kind == "constant":
        value = float(params.get("value", 1.0))
        return HeatOracle(
            kind=kind,
            n=n,
            u=lambda x, t: np.full(_points(x, n).shape[0], value),
            u_t=lambda x, t: np.zeros(_points(x, n).shape[0]),
            grad=lambda x, t: np.zeros(_points(x, n).shape),
            lap=lambda x, t: np.zeros(_points(x, n).shape[0]),
        )
    if kind == "linear":
        coeffs = np.broadcast_to(
            np.asarray(params.get("coeffs", [1.0] + [0.0] * (n - 1)), dtype=float), (n,)
        ).copy()
        offset = float(params.get("offset", 0.0))
        return HeatOracle(
            kind=kind,
            n=n,
            u=lambda x, t: _points(x, n) @ coeffs + offset,
            u_t=lambda x, t: np.zeros(_points(x, n).shape[0]),
            grad=lambda x, t: np.broadcast_to(coeffs, _points(x, n).shape).copy(),
            lap=lambda x, t: np.zeros(_points(x, n).shape[0]),
        )
    if kind == "caloric-quadratic":
        return HeatOracle(
            kind=kind,
            n=n,
            u=lambda x, t: (_points(x, n) ** 2).sum(axis=1) + 2.0 * n * np.asarray(t),
            u_t=lambda x, t: np.full(_points(x, n).shape[0], 2.0 * n),
            grad=lambda x, t: 2.0 * _points(x, n),
            lap=lambda x, t: np.full(_points(x, n).shape[0], 2.0 * n),
        )
    if kind == "heat-kernel":
        t0 = float(params.get("time_offset", 1.0))
        if t0 <= 0.0:
            raise InvalidInputError("heat-kernel time_offset must be positive")

        def kernel(x, t):
            pts = _points(x, n)
            tau = np.broadcast_to(
                t0 + np.asarray(t, dtype=float), (pts.shape[0],)
            ).astype(float)
            if np.any(tau <= 0.0):
                raise InvalidInputError("heat-kernel sampled outside its time domain")
            r2 = (pts**2).sum(axis=1)
            return (4.0 * np.pi * tau) ** (-n / 2.0) * np.exp(-r2 / (4.0 * tau)), tau, r2

        def k_u(x, t):
            return kernel(x, t)[0]

        def k_ut(x, t):
            val, tau, r2 = kernel(x, t)
            return val * (r2 / (4.0 * tau**2) - n / (2.0 * tau))

        def k_grad(x, t):
            val, tau, _ = kernel(x, t)
            return -_points(x, n) * (val / (2.0 * tau))[:, None]

        def k_lap(x, t):
            return k_ut(x, t)

        return HeatOracle(
            kind=kind, n=n, u=k_u, u_t=k_ut, grad=k_grad, lap=k_lap, t_min=-t0
        )
    if kind == "custom-polynomial":
        coeffs = params.get("coeffs")
        if coeffs is None:
            raise InvalidInputError("custom-polynomial needs 'coeffs'")
        return _polynomial_oracle(n, coeffs, bool(params.get("complete", True)))
    raise InvalidInputError(f"unsupported oracle kind {kind!r}")


@dataclass(frozen=True)
class CovSolution:
    """The change of variables ``w(x, s) = u(e^{-s/2} x, -e^{-s})``.

    All derivatives come from the chain rule applied to the oracle's
    closed-form evaluators; nothing is differenced numerically.
    """

    oracle: HeatOracle

    def _broadcast(self, x, s) -> tuple[np.ndarray, np.ndarray]:
        pts = _points(x, self.oracle.n)
        s_arr = np.broadcast_to(np.asarray(s, dtype=float), (pts.shape[0],)).astype(float)
        return pts, s_arr

    def mapped(self, x: np.ndarray, s) -> tuple[np.ndarray, np.ndarray]:
        pts, s_arr = self._broadcast(x, s)
        xi = pts * np.exp(-s_arr / 2.0)[:, None]
        return xi, -np.exp(-s_arr)

    def w(self, x, s) -> np.ndarray:
        xi, t = self.mapped(x, s)
        return self.oracle.u(xi, t)

    def ds_w(self, x, s) -> np.ndarray:
        pts, s_arr = self._broadcast(x, s)
        xi, t = self.mapped(x, s)
        grad_term = np.einsum("nd,nd->n", self.oracle.grad(xi, t), pts)
        return -0.5 * np.exp(-s_arr / 2.0) * grad_term + np.exp(-s_arr) * self.oracle.u_t(xi, t)

    def grad_w(self, x, s) -> np.ndarray:
        pts, s_arr = self._broadcast(x, s)
        xi, t = self.mapped(x, s)
        return self.oracle.grad(xi, t) * np.exp(-s_arr / 2.0)[:, None]

    def lap_w(self, x, s) -> np.ndarray:
        pts, s_arr = self._broadcast(x, s)
        xi, t = self.mapped(x, s)
        return np.exp(-s_arr) * self.oracle.lap(xi, t)

    def drift_residual(self, x, s) -> np.ndarray:
        """``(d_s - L) w`` with ``L = lap - <x, grad>/2`` for the Gauss weight."""
        pts = _points(x, self.oracle.n)
        drift = self.lap_w(x, s) - 0.5 * np.einsum(
            "nd,nd->n", self.grad_w(x, s), pts
        )
        return self.ds_w(x, s) - drift

    def heat_defect_rhs(self, x, s) -> np.ndarray:
        """``e^{-s} (u_t - lap u)`` at the mapped point: the identity's RHS."""
        pts, s_arr = self._broadcast(x, s)
        xi, t = self.mapped(x, s)
        return np.exp(-s_arr) * self.oracle.residual(xi, t)


def cov_transform(oracle: HeatOracle) -> CovSolution:
    return CovSolution(oracle=oracle)


def sample_grid(n: int, x_lim: float = 3.0, s_range=(0.2, 3.0), points: int = 20):
    """A (points x points) tensor sample of (x, s) pairs for residual checks."""
    xs = np.linspace(-x_lim, x_lim, points)
    ss = np.linspace(s_range[0], s_range[1], points)
    if n == 1:
        xg, sg = np.meshgrid(xs, ss, indexing="ij")
        return xg.ravel()[:, None], sg.ravel()
    xg, yg, sg = np.meshgrid(xs, xs, ss, indexing="ij")
    return np.column_stack([xg.ravel(), yg.ravel()]), sg.ravel()


def check_cov_residual(cov: CovSolution, points, tol: float = 1e-10) -> CheckReport:
    """Residual identity of the change of variables at the sample points."""
    x, s = points
    gap = np.abs(cov.drift_residual(x, s) - cov.heat_defect_rhs(x, s))
    worst = int(np.argmax(gap))
    return passing(
        "cov-residual",
        tol - float(gap[worst]),
        tol,
        location=float(np.asarray(s).ravel()[worst]),
        max_gap=float(gap[worst]),
        samples=int(np.asarray(s).size),
    )


def _gh_points(order: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    y, w = np.polynomial.hermite.hermgauss(order)
    if n == 1:
        return y[:, None], w
    ya, yb = np.meshgrid(y, y, indexing="ij")
    return np.column_stack([ya.ravel(), yb.ravel()]), np.outer(w, w).ravel()


def poon_h(oracle: HeatOracle, radius: float, order: int = 64) -> float:
    """Parabolically scaled Gaussian frequency of the oracle at time -R^2.

    ``H(R) = (4 pi R^2)^{-n/2} * integral of u^2(y, -R^2) exp(-|y|^2/(4R^2))``
    with the positive normalization, evaluated by Gauss quadrature scaled to
    the weight (exact for polynomial oracles within the quadrature degree).
    """
    if radius <= 0.0:
        raise InvalidInputError("radius must be positive")
    t = -(radius**2)
    if t <= oracle.t_min:
        raise InvalidInputError(
            f"oracle is not defined at time {t:.6g} (needs t > {oracle.t_min:.6g})"
        )
    pts, wts = _gh_points(order, oracle.n)
    vals = oracle.u(2.0 * radius * pts, t)
    return float(np.pi ** (-oracle.n / 2.0) * np.sum(wts * vals**2))


def gauss_weighted_norm2(cov: CovSolution, s: float, order: int = 64) -> float:
    """``I_w(s) = integral of w^2(x, s) exp(-|x|^2/4) dx`` by Gauss quadrature."""
    pts, wts = _gh_points(order, cov.oracle.n)
    vals = cov.w(2.0 * pts, np.full(pts.shape[0], float(s)))
    return float(2.0 ** cov.oracle.n * np.sum(wts * vals**2))


def check_poon_convexity(
    oracle: HeatOracle, s_grid: np.ndarray, tol: float = 1e-8, order: int = 64
) -> CheckReport:
    """Convexity of ``s -> log H(e^{s/2})`` by second differences.

    The mirrored parameterization ``log H(e^{-s/2})`` is reported in aux; it
    is convex exactly when the primary one is (affine reparameterization).
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size < 3:
        raise InvalidInputError("convexity needs at least 3 samples")
    log_plus = np.log([poon_h(oracle, np.exp(s / 2.0), order) for s in s_grid])
    d2_plus = log_plus[2:] - 2.0 * log_plus[1:-1] + log_plus[:-2]
    # mirrored radii can leave a bounded time domain (e.g. the heat kernel)
    if np.exp(-s_grid.min()) < -oracle.t_min:
        log_minus = np.log([poon_h(oracle, np.exp(-s / 2.0), order) for s in s_grid])
        d2_minus = log_minus[2:] - 2.0 * log_minus[1:-1] + log_minus[:-2]
        mirrored = float(d2_minus.min())
    else:
        mirrored = None
    worst = int(np.argmin(d2_plus))
    return passing(
        "poon-convexity",
        float(d2_plus[worst]),
        tol,
        location=float(s_grid[1 + worst]),
        min_second_difference=float(d2_plus.min()),
        mirrored_min_second_difference=mirrored,
    )


def check_poon_correspondence(
    oracle: HeatOracle, s_grid: np.ndarray, tol: float = 1e-8, order: int = 64
) -> CheckReport:
    """The weighted norm of w reproduces H up to the Gaussian normalization.

    Gates on ``I_w(s) / H(e^{-s/2}) == (4 pi)^{n/2}`` (the substitution
    ``R = e^{-s/2}`` is the self-consistent convention); the ratio against
    ``H(e^{+s/2})`` is reported in aux so the sign discrepancy stays visible.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    cov = cov_transform(oracle)
    iw = np.array([gauss_weighted_norm2(cov, s, order) for s in s_grid])
    h_minus = np.array([poon_h(oracle, np.exp(-s / 2.0), order) for s in s_grid])
    h_plus = np.array([poon_h(oracle, np.exp(s / 2.0), order) for s in s_grid])
    expected = (4.0 * np.pi) ** (oracle.n / 2.0)
    ratio = iw / h_minus
    rel_dev = np.abs(ratio / expected - 1.0)
    worst = int(np.argmax(rel_dev))
    ratio_plus = iw / h_plus
    return passing(
        "poon-correspondence",
        tol - float(rel_dev[worst]),
        tol,
        location=float(s_grid[worst]),
        expected_ratio=expected,
        ratio_min=float(ratio.min()),
        ratio_max=float(ratio.max()),
        mismatched_ratio_min=float(ratio_plus.min()),
        mismatched_ratio_max=float(ratio_plus.max()),
    )


def trajectory_from_cov(
    cov: CovSolution, geometry: WeightedGeometry, grid: TimeGrid
) -> Trajectory:
    """Sample w on the Gauss line as an analytic-oracle trajectory in s."""
    if geometry.basis is None or cov.oracle.n != 1:
        raise InvalidInputError("cov trajectories sample 1D oracles on the gauss line")
    fields = tuple(
        Field(geometry, cov.w(geometry.coords, np.full(geometry.node_count, s)))
        for s in grid.times
    )
    return Trajectory(grid=grid, fields=fields, provenance=PROVENANCE_ANALYTIC)
