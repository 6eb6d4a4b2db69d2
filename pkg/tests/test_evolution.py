import numpy as np
import pytest

from parafreq import (
    Field,
    GaugeSpec,
    PerturbationSpec,
    TimeGrid,
    evolve_cn,
    evolve_exact,
    evolve_perturbed,
    gauge_transform,
    eigenpairs,
    weighted_inner,
    weighted_norm,
)
from parafreq.errors import (
    CertificationFailureError,
    DegenerateInputError,
    InvalidInputError,
)

TWO_PI = 2.0 * np.pi


def mu_distance(a, b):
    return weighted_norm(Field(a.geometry, a.values - b.values))


class TestSpectralEvolution:
    def test_initial_sample_is_exact(self, flat_circle_op):
        geom = flat_circle_op.geometry
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        traj = evolve_exact(flat_circle_op, u0, TimeGrid(0.0, 1.0, 1))
        assert np.max(np.abs(traj.fields[0].values - u0.values)) < 1e-12

    def test_eigenmode_decays_at_its_rate(self, flat_circle_op):
        pair = eigenpairs(flat_circle_op, 2)[1]
        grid = TimeGrid(0.0, 1.0, 50)
        traj = evolve_exact(flat_circle_op, pair.eigenfield, grid)
        for k, t in enumerate(grid.times):
            expected = np.exp(pair.eigenvalue * t) * pair.eigenfield.values
            gap = mu_distance(traj.fields[k], Field(traj.geometry, expected))
            assert gap < 1e-10

    def test_two_mode_norm_closed_form(self, flat_circle_op):
        # discrete rates from the dispersion relation, independent of eigh
        geom = flat_circle_op.geometry
        h = TWO_PI / 128
        rate = lambda k: -4.0 * np.sin(k * h / 2.0) ** 2 / h**2
        x = geom.coords[:, 0]
        u0 = Field(geom, np.sin(x) + np.sin(2.0 * x))
        grid = TimeGrid(0.0, 1.0, 100)
        traj = evolve_exact(flat_circle_op, u0, grid)
        for k, t in enumerate(grid.times):
            fld = traj.fields[k]
            expected = np.pi * (np.exp(2.0 * rate(1) * t) + np.exp(2.0 * rate(2) * t))
            assert abs(weighted_inner(fld, fld) / expected - 1.0) < 1e-8

    def test_semigroup_property(self, weighted_circle_op):
        geom = weighted_circle_op.geometry
        rng = np.random.default_rng(11)
        u0 = Field(geom, rng.standard_normal(geom.node_count))
        full = evolve_exact(weighted_circle_op, u0, TimeGrid(0.0, 1.0, 10))
        first = evolve_exact(weighted_circle_op, u0, TimeGrid(0.0, 0.5, 5))
        second = evolve_exact(
            weighted_circle_op, first.fields[-1], TimeGrid(0.5, 1.0, 5)
        )
        assert mu_distance(full.fields[-1], second.fields[-1]) < 1e-10

    def test_energy_dissipation(self, conformal_torus_op):
        geom = conformal_torus_op.geometry
        rng = np.random.default_rng(12)
        u0 = Field(geom, rng.standard_normal(geom.node_count))
        traj = evolve_exact(conformal_torus_op, u0, TimeGrid(0.0, 0.5, 40))
        norms = [weighted_inner(f, f) for f in traj.fields]
        assert all(b <= a * (1.0 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_zero_initial_field_rejected(self, flat_circle_op):
        zero = Field.constant(flat_circle_op.geometry, 0.0)
        with pytest.raises(DegenerateInputError):
            evolve_exact(flat_circle_op, zero, TimeGrid(0.0, 1.0, 4))

    def test_componentwise_decoupling(self, weighted_circle_op):
        geom = weighted_circle_op.geometry
        rng = np.random.default_rng(13)
        values = rng.standard_normal((geom.node_count, 2))
        grid = TimeGrid(0.0, 0.3, 12)
        both = evolve_exact(weighted_circle_op, Field(geom, values), grid)
        parts = [
            evolve_exact(weighted_circle_op, Field(geom, values[:, j]), grid)
            for j in range(2)
        ]
        for k in range(len(grid.times)):
            for j in range(2):
                gap = np.max(
                    np.abs(both.fields[k].values[:, j] - parts[j].fields[k].values[:, 0])
                )
                assert gap < 1e-12


class TestImplicitStepping:
    def test_constant_field_is_fixed(self, weighted_circle_op):
        one = Field.constant(weighted_circle_op.geometry)
        traj = evolve_cn(weighted_circle_op, one, TimeGrid(0.0, 1.0, 20))
        assert np.max(np.abs(traj.fields[-1].values - 1.0)) < 1e-12

    def test_eigenmode_richardson(self, flat_circle_op):
        # I(b)/I(a) converges to exp(2 lambda (b-a)) at second order
        pair = eigenpairs(flat_circle_op, 2)[1]
        errors = []
        for steps in (50, 100):
            traj = evolve_cn(flat_circle_op, pair.eigenfield, TimeGrid(0.0, 1.0, steps))
            ratio = weighted_inner(traj.fields[-1], traj.fields[-1])
            errors.append(abs(ratio - np.exp(2.0 * pair.eigenvalue)))
        assert errors[0] / errors[1] > 3.5

    def test_agreement_with_exact_is_second_order(self, weighted_circle_op):
        geom = weighted_circle_op.geometry
        rng = np.random.default_rng(14)
        u0 = Field(geom, np.sin(geom.coords[:, 0]) + 0.3 * rng.standard_normal())
        gaps = []
        for steps in (40, 80):
            grid = TimeGrid(0.0, 1.0, steps)
            exact = evolve_exact(weighted_circle_op, u0, grid)
            stepped = evolve_cn(weighted_circle_op, u0, grid)
            gaps.append(mu_distance(exact.fields[-1], stepped.fields[-1]))
        assert gaps[0] / gaps[1] > 3.5

    def test_provenance_tags(self, flat_circle_op):
        u0 = Field(flat_circle_op.geometry, np.sin(flat_circle_op.geometry.coords[:, 0]))
        grid = TimeGrid(0.0, 0.1, 4)
        assert evolve_exact(flat_circle_op, u0, grid).provenance == "spectral-exact"
        assert evolve_cn(flat_circle_op, u0, grid).provenance == "implicit-step"


class TestPerturbedFlow:
    def test_zero_perturbation_bit_matches_plain_stepping(self, weighted_circle_op):
        geom = weighted_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 30)
        pert = PerturbationSpec.build(geom, grid, bound=0.0)
        rng = np.random.default_rng(15)
        u0 = Field(geom, rng.standard_normal(geom.node_count))
        a = evolve_perturbed(weighted_circle_op, u0, grid, pert)
        b = evolve_cn(weighted_circle_op, u0, grid)
        for fa, fb in zip(a.fields, b.fields):
            assert np.array_equal(fa.values, fb.values)

    def test_advection_preserves_flat_norm(self, flat_circle_op):
        # traveling wave: I(t) = pi * exp(2 rate t) for u0 = sin(kx)
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 400)
        beta = 0.5
        pert = PerturbationSpec.build(
            geom, grid, b=lambda t: np.full((geom.node_count, 1), beta),
            bound=beta, gradient_only=True,
        )
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        traj = evolve_perturbed(flat_circle_op, u0, grid, pert)
        h = TWO_PI / 128
        rate = -4.0 * np.sin(h / 2.0) ** 2 / h**2
        final = weighted_inner(traj.fields[-1], traj.fields[-1])
        expected = np.pi * np.exp(2.0 * rate)
        assert abs(final / expected - 1.0) < 1e-4

    def test_advection_travels(self, flat_circle_op):
        # the discrete drift shifts the phase by ~beta*t
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 400)
        beta = 0.5
        pert = PerturbationSpec.build(
            geom, grid, b=lambda t: np.full((geom.node_count, 1), beta),
            bound=beta, gradient_only=True,
        )
        x = geom.coords[:, 0]
        traj = evolve_perturbed(flat_circle_op, Field(geom, np.sin(x)), grid, pert)
        h = TWO_PI / 128
        rate = -4.0 * np.sin(h / 2.0) ** 2 / h**2
        # discrete centered advection rotates at speed beta*sin(h)/h
        speed = beta * np.sin(h) / h
        expected = np.exp(rate) * np.sin(x + speed)
        assert np.max(np.abs(traj.fields[-1].values[:, 0] - expected)) < 5e-4

    def test_constant_potential_is_gauge_factor(self, weighted_circle_op):
        geom = weighted_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 200)
        c0 = 0.4
        pert = PerturbationSpec.build(
            geom, grid, c=lambda t: np.full(geom.node_count, c0), bound=c0
        )
        rng = np.random.default_rng(16)
        u0 = Field(geom, np.sin(geom.coords[:, 0]) + 0.2 * rng.standard_normal())
        perturbed = evolve_perturbed(weighted_circle_op, u0, grid, pert)
        plain = evolve_cn(weighted_circle_op, u0, grid)
        gaps = []
        for k, t in enumerate(grid.times):
            scaled = np.exp(c0 * t) * plain.fields[k].values
            gaps.append(
                mu_distance(perturbed.fields[k], Field(geom, scaled))
                / weighted_norm(perturbed.fields[k])
            )
        assert max(gaps) < 1e-4

    def test_certification_failure(self, flat_circle_op):
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 10)
        with pytest.raises(CertificationFailureError):
            PerturbationSpec.build(
                geom, grid,
                b=lambda t: np.full((geom.node_count, 1), 0.5),
                bound=0.3,
            )

    def test_gradient_only_requires_zero_potential(self, flat_circle_op):
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 10)
        with pytest.raises(InvalidInputError):
            PerturbationSpec.build(
                geom, grid,
                c=lambda t: np.full(geom.node_count, 0.2),
                bound=0.2, gradient_only=True,
            )

    def test_grid_mismatch_rejected(self, flat_circle_op):
        geom = flat_circle_op.geometry
        pert = PerturbationSpec.build(geom, TimeGrid(0.0, 1.0, 10), bound=0.0)
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        with pytest.raises(InvalidInputError):
            evolve_perturbed(flat_circle_op, u0, TimeGrid(0.0, 1.0, 20), pert)

    def test_conformal_geometry_rejected(self, conformal_torus_op):
        geom = conformal_torus_op.geometry
        grid = TimeGrid(0.0, 1.0, 10)
        pert = PerturbationSpec.build(
            geom, grid, c=lambda t: np.full(geom.node_count, 0.1), bound=0.1
        )
        rng = np.random.default_rng(17)
        u0 = Field(geom, rng.standard_normal(geom.node_count))
        with pytest.raises(InvalidInputError):
            evolve_perturbed(conformal_torus_op, u0, grid, pert)

    def test_certified_bound_recorded(self, flat_circle_op):
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 10)
        pert = PerturbationSpec.build(
            geom, grid, b=lambda t: np.full((geom.node_count, 1), 0.2), bound=0.25
        )
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        traj = evolve_perturbed(flat_circle_op, u0, grid, pert)
        assert traj.certified_bound is not None
        assert np.allclose(traj.certified_bound, 0.25)

    def test_tight_bound_autocertification(self, flat_circle_op):
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 10)
        pert = PerturbationSpec.build(
            geom, grid, b=lambda t: np.full((geom.node_count, 1), 0.2 * np.cos(t))
        )
        assert np.allclose(pert.bound, 0.2 * np.abs(np.cos(grid.times)))


class TestGauge:
    def test_identity_gauge(self, flat_circle_op):
        geom = flat_circle_op.geometry
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        traj = evolve_exact(flat_circle_op, u0, TimeGrid(0.0, 1.0, 20))
        same = gauge_transform(traj, GaugeSpec(rate=0.0))
        for a, b in zip(traj.fields, same.fields):
            assert np.array_equal(a.values, b.values)

    def test_constant_rate_scales_norm(self, flat_circle_op):
        geom = flat_circle_op.geometry
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        grid = TimeGrid(0.0, 1.0, 20)
        traj = evolve_exact(flat_circle_op, u0, grid)
        scaled = gauge_transform(traj, GaugeSpec(rate=0.7))
        for k, t in enumerate(grid.times):
            base = weighted_inner(traj.fields[k], traj.fields[k])
            now = weighted_inner(scaled.fields[k], scaled.fields[k])
            assert abs(now - np.exp(-2.0 * 0.7 * t) * base) < 1e-10 * base

    def test_gauged_equation_reduces_to_pure_flow(self, flat_circle_op):
        # solve u_t = L u + c0 u by perturbation, remove the gauge, compare
        geom = flat_circle_op.geometry
        grid = TimeGrid(0.0, 1.0, 200)
        c0 = 0.3
        pert = PerturbationSpec.build(
            geom, grid, c=lambda t: np.full(geom.node_count, c0), bound=c0
        )
        u0 = Field(geom, np.sin(geom.coords[:, 0]))
        gauged = evolve_perturbed(flat_circle_op, u0, grid, pert)
        removed = gauge_transform(gauged, GaugeSpec(rate=c0))
        pure = evolve_cn(flat_circle_op, u0, grid)
        gap = mu_distance(removed.fields[-1], pure.fields[-1])
        assert gap < 1e-4 * weighted_norm(pure.fields[-1])
