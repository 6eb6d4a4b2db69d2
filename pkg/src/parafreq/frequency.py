"""Frequency traces I, D, U of a flow and the monotonicity/rigidity checks.

Trace derivatives use second-order centered differences on the uniform time
grid (one-sided second-order stencils at the endpoints); inequality checks
gate on interior samples only.  Spectrally exact trajectories satisfy the
inequalities to near round-off; implicit-step trajectories carry the
discretization budget ``10 * (dt^2 + h^2) * (1 + |U(a)|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.integrate

from .core import PROVENANCE_IMPLICIT, Field, Trajectory, weighted_norm
from .errors import DegenerateTraceError, InvalidInputError
from .operators import DriftOperator, assemble
from .reports import CheckReport, passing


@dataclass(frozen=True)
class FrequencyTrace:
    """Sampled I(t), D(t), U(t) = D/I with finite-difference derivatives."""

    times: np.ndarray
    I: np.ndarray
    D: np.ndarray
    U: np.ndarray
    dlogI: np.ndarray
    dU: np.ndarray
    provenance: str
    dt: float
    length_scale: float
    gradient_only: bool = False
    certified_bound: np.ndarray | None = None
    aux: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.times, self.I, self.D, self.U, self.dlogI, self.dU):
            arr.setflags(write=False)

    @property
    def samples(self) -> int:
        return self.times.size


def frequency_trace(traj: Trajectory, op: DriftOperator | None = None) -> FrequencyTrace:
    """Build the frequency trace of a trajectory.

    D is computed both as the negated Dirichlet energy and as ``<u, L u>_mu``;
    their worst relative gap is recorded under ``aux['d_expression_gap']``.
    Raises :class:`DegenerateTraceError` when I(t) vanishes at any sample
    (the backward-uniqueness regime).
    """
    if op is None:
        op = assemble(traj.geometry)
    times = traj.grid.times
    mu = traj.geometry.mu
    stack = np.stack([fld.values for fld in traj.fields])
    I = np.einsum("snc,n,snc->s", stack, mu, stack)
    if np.any(I <= 0.0) or not np.all(np.isfinite(I)):
        k = int(np.argmin(I))
        raise DegenerateTraceError(
            f"I(t) vanished at t={times[k]:.6g}; backward-uniqueness regime"
        )
    energy = traj.geometry.energy_batch(stack)
    D = -energy
    applied = np.matmul(op.matrix, stack)
    d_op = np.einsum("snc,n,snc->s", stack, mu, applied)
    d_gap = float(np.max(np.abs(d_op + energy) / (energy + np.abs(I))))
    U = D / I
    dt = traj.grid.dt
    dlogI = np.gradient(np.log(I), dt, edge_order=2)
    dU = np.gradient(U, dt, edge_order=2)
    return FrequencyTrace(
        times=times,
        I=I,
        D=D,
        U=U,
        dlogI=dlogI,
        dU=dU,
        provenance=traj.provenance,
        dt=dt,
        length_scale=traj.geometry.length_scale,
        gradient_only=traj.gradient_only,
        certified_bound=traj.certified_bound,
        aux={"d_expression_gap": d_gap},
    )


def default_tolerance(trace: FrequencyTrace, scale: float = 1.0) -> float:
    """Provenance-aware tolerance: budgeted for stepped flows, tight otherwise."""
    if trace.provenance == PROVENANCE_IMPLICIT:
        return 10.0 * scale * (trace.dt**2 + trace.length_scale**2) * (1.0 + abs(float(trace.U[0])))
    return 1e-9 * scale


def derivative_tolerance(trace: FrequencyTrace, scale: float = 1.0) -> float:
    """Budget for checks that difference the trace in time.

    Centered differences carry an O(dt^2) error even on spectrally exact
    trajectories; stepped trajectories add the spatial-coupling h^2 term.
    """
    base = trace.dt**2
    if trace.provenance == PROVENANCE_IMPLICIT:
        base += trace.length_scale**2
    return 10.0 * scale * base * (1.0 + abs(float(trace.U[0])))


def _sample_bound(C, trace: FrequencyTrace) -> np.ndarray:
    """Resolve a bound argument (callable/array/scalar/None) onto the grid."""
    if C is None:
        if trace.certified_bound is None:
            raise InvalidInputError("no bound C(t): pass one or use a certified trace")
        return np.asarray(trace.certified_bound, dtype=float)
    if callable(C):
        return np.array([float(C(t)) for t in trace.times])
    return np.broadcast_to(np.asarray(C, dtype=float), trace.times.shape).astype(float)


def check_u_monotone(trace: FrequencyTrace, tol: float | None = None) -> CheckReport:
    """U(t) must be nondecreasing sample to sample."""
    if tol is None:
        tol = default_tolerance(trace)
    diffs = np.diff(trace.U)
    worst = int(np.argmin(diffs))
    return passing(
        "u-monotone",
        float(diffs[worst]),
        tol,
        location=trace.times[worst + 1],
        min_increment=float(diffs.min()),
    )


def check_log_convexity(
    trace: FrequencyTrace, tol: float | None = None, deriv_tol: float | None = None
) -> CheckReport:
    """Second differences of log I must be >= -tol * dt^2.

    Also measures the drift-flow identity ``(log I)' = 2 U`` on interior
    samples; it gates only when ``deriv_tol`` is given (the finite-difference
    gap is O(dt^2) with a flow-dependent constant).
    """
    if trace.samples < 3:
        raise InvalidInputError("log-convexity needs at least 3 samples")
    if tol is None:
        tol = default_tolerance(trace) / trace.dt**2
    log_i = np.log(trace.I)
    second = log_i[2:] - 2.0 * log_i[1:-1] + log_i[:-2]
    floor = tol * trace.dt**2
    worst = int(np.argmin(second))
    identity_gap = float(np.max(np.abs(trace.dlogI[1:-1] - 2.0 * trace.U[1:-1])))
    margin = float(second[worst])
    ok = margin >= -floor
    if deriv_tol is not None:
        ok = ok and identity_gap <= deriv_tol
    return CheckReport(
        name="log-convexity",
        passed=ok,
        margin=margin,
        tolerance=floor,
        location=float(trace.times[worst + 1]),
        aux={
            "min_second_difference": float(second.min()),
            "dlogI_vs_2U_gap": identity_gap,
            "deriv_tol": deriv_tol,
        },
    )


def check_hadamard_bound(trace: FrequencyTrace, tol: float | None = None) -> CheckReport:
    """Three-circles-type growth bound ``log I(b) - log I(a) >= 2 U(a) (b-a)``."""
    if tol is None:
        tol = default_tolerance(trace)
    span = trace.times[-1] - trace.times[0]
    margin = float(np.log(trace.I[-1]) - np.log(trace.I[0]) - 2.0 * trace.U[0] * span)
    return passing(
        "hadamard-bound",
        margin,
        tol,
        location=trace.times[-1],
        log_ratio=float(np.log(trace.I[-1] / trace.I[0])),
        predicted=float(2.0 * trace.U[0] * span),
    )


def check_rigidity(
    traj: Trajectory, tol: float | None = None, op: DriftOperator | None = None
) -> CheckReport:
    """Classify a trajectory as an eigenmode flow and verify the equality case.

    When U is constant to within tol the flow must be a separated eigenmode:
    ``u(t) = exp(lambda t) u(a)`` and ``L u(a) = lambda u(a)`` with
    ``lambda = U(a)``.  Non-constant U is reported as non-rigid (and passes).
    """
    if op is None:
        op = assemble(traj.geometry)
    trace = frequency_trace(traj, op)
    if tol is None:
        tol = default_tolerance(trace)
    u_dev = float(np.max(np.abs(trace.U - trace.U[0])))
    lam = float(trace.U[0])
    is_eigenmode = u_dev <= tol
    u0 = traj.fields[0]
    norm0 = weighted_norm(u0)
    if is_eigenmode:
        sep_res = 0.0
        for k, fld in enumerate(traj.fields):
            factor = np.exp(lam * (trace.times[k] - trace.times[0]))
            diff = Field(traj.geometry, fld.values - factor * u0.values)
            sep_res = max(sep_res, weighted_norm(diff) / norm0)
        lu = op.apply(u0)
        eig_res = weighted_norm(
            Field(traj.geometry, lu.values - lam * u0.values)
        ) / norm0
        margin = tol - max(sep_res, eig_res)
        aux = {"separation_residual": sep_res, "eigen_residual": eig_res}
    else:
        margin = u_dev - tol
        aux = {}
    return CheckReport(
        name="rigidity",
        passed=margin >= -tol,
        margin=float(margin),
        tolerance=float(tol),
        location=float(trace.times[0]),
        aux={"is_eigenmode": is_eigenmode, "lambda_estimate": lam,
             "u_variation": u_dev, **aux},
    )


def check_general_frequency(
    trace: FrequencyTrace, C=None, tol: float | None = None
) -> CheckReport:
    """Perturbed-flow frequency inequalities.

    At every interior sample: ``U' >= C^2 (U - 1)`` and
    ``[log(1 - U)]' <= C^2``.
    """
    if tol is None:
        tol = derivative_tolerance(trace)
    bound = _sample_bound(C, trace)
    sl = slice(1, -1)
    c2 = bound[sl] ** 2
    m1 = trace.dU[sl] - c2 * (trace.U[sl] - 1.0)
    dlog1mu = np.gradient(np.log(1.0 - trace.U), trace.dt, edge_order=2)
    m2 = c2 - dlog1mu[sl]
    margins = np.minimum(m1, m2)
    worst = int(np.argmin(margins))
    return passing(
        "general-frequency",
        float(margins[worst]),
        tol,
        location=trace.times[1 + worst],
        min_u_rate_margin=float(m1.min()),
        min_log_one_minus_u_margin=float(m2.min()),
    )


def check_general_lower_bound(
    trace: FrequencyTrace, C=None, tol: float | None = None
) -> CheckReport:
    """Perturbed-flow lower bound on the decay of I.

    Gates on the stepwise inequality
    ``(log I)' >= (2 + C/2) U - 3C/2`` at interior samples.  The two displayed
    closed forms (the prefactor ``2 + sup C`` multiplying the bracket versus
    sitting inside the exponential) disagree with each other; both margins are
    reported in aux without gating.
    """
    if tol is None:
        tol = derivative_tolerance(trace)
    bound = _sample_bound(C, trace)
    sl = slice(1, -1)
    stepwise = trace.dlogI[sl] - (
        (2.0 + 0.5 * bound[sl]) * trace.U[sl] - 1.5 * bound[sl]
    )
    worst = int(np.argmin(stepwise))
    span = trace.times[-1] - trace.times[0]
    sup_c = float(bound.max())
    int_c2 = float(np.trapezoid(bound**2, trace.times))
    delta_log_i = float(np.log(trace.I[-1]) - np.log(trace.I[0]))
    u0 = float(trace.U[0])
    bracket = np.exp(int_c2) * (u0 - 1.0) + 1.0 - 1.5 * sup_c
    statement_rhs = span * (2.0 + sup_c) * bracket
    proof_rhs = span * (np.exp((2.0 + sup_c) * int_c2) * (u0 - 1.0) + 1.0 - 1.5 * sup_c)
    return passing(
        "general-lower-bound",
        float(stepwise[worst]),
        tol,
        location=trace.times[1 + worst],
        statement_margin=delta_log_i - statement_rhs,
        proof_margin=delta_log_i - proof_rhs,
        sup_c=sup_c,
        int_c_squared=int_c2,
    )


def check_gradient_only(
    trace: FrequencyTrace, C=None, tol: float | None = None
) -> CheckReport:
    """Sharper bounds for gradient-only perturbations (c == 0).

    Requires a gradient-only trace with U(a) < 0.  Verifies
    ``[log(-U)]' <= C^2 / 2`` on interior samples where U < 0,
    ``U(t) >= U(a) exp(0.5 * int_a^t C^2)``, and the closed-form lower bound
    on I(b) (with sup C standing in for a time-varying C).
    """
    if not trace.gradient_only:
        raise InvalidInputError("trace does not come from a gradient-only perturbation")
    if trace.U[0] >= 0.0:
        raise InvalidInputError("gradient-only bounds need U(a) < 0")
    if tol is None:
        tol = derivative_tolerance(trace)
    bound = _sample_bound(C, trace)
    negative = trace.U < 0.0
    cutoff = int(np.argmax(~negative)) if not negative.all() else trace.samples
    applicable = slice(0, cutoff)

    rate_margin = np.inf
    rate_loc = float(trace.times[0])
    if cutoff >= 3:
        dlognegu = np.gradient(
            np.log(-trace.U[applicable]), trace.dt, edge_order=2
        )
        interior = slice(1, cutoff - 1)
        gaps = 0.5 * bound[applicable][interior] ** 2 - dlognegu[interior]
        k = int(np.argmin(gaps))
        rate_margin = float(gaps[k])
        rate_loc = float(trace.times[1 + k])

    cum_c2 = scipy.integrate.cumulative_trapezoid(bound**2, trace.times, initial=0.0)
    envelope = trace.U[0] * np.exp(0.5 * cum_c2)
    env_margins = trace.U - envelope
    k_env = int(np.argmin(env_margins))

    span = trace.times[-1] - trace.times[0]
    sup_c = float(bound.max())
    int_c2 = float(cum_c2[-1])
    u0 = float(trace.U[0])
    final_rhs = span * (
        2.0 * u0 * np.exp(0.5 * int_c2) - sup_c * np.sqrt(-u0) * np.exp(0.25 * int_c2)
    )
    final_margin = float(np.log(trace.I[-1]) - np.log(trace.I[0]) - final_rhs)

    margin = min(rate_margin, float(env_margins[k_env]), final_margin)
    location = {
        rate_margin: rate_loc,
        float(env_margins[k_env]): float(trace.times[k_env]),
        final_margin: float(trace.times[-1]),
    }[margin]
    return passing(
        "gradient-only",
        float(margin),
        tol,
        location=location,
        rate_margin=rate_margin if np.isfinite(rate_margin) else None,
        envelope_margin=float(env_margins[k_env]),
        final_bound_margin=final_margin,
        not_applicable_from=None if cutoff == trace.samples else float(trace.times[cutoff]),
    )


def vanishing_order_surrogate(trace: FrequencyTrace, c: float) -> CheckReport:
    """Finite-horizon vanishing-order report for ``exp(c t) I(t)``.

    Reports the extremes of the scaled trace and whether it stays above the
    growth-bound prediction ``exp(c t) I(a) exp(2 U(a) (t - a))`` at every
    sample.  No infinite-time claim is made.
    """
    tol = default_tolerance(trace)
    scaled_log = c * trace.times + np.log(trace.I)
    pred_log = (
        c * trace.times
        + np.log(trace.I[0])
        + 2.0 * trace.U[0] * (trace.times - trace.times[0])
    )
    margins = scaled_log - pred_log
    worst = int(np.argmin(margins))
    return passing(
        "vanishing-order",
        float(margins[worst]),
        tol,
        location=trace.times[worst],
        min_scaled=float(np.exp(scaled_log.min())),
        max_scaled=float(np.exp(scaled_log.max())),
        rate=c,
    )
