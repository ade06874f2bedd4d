import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sixvertex import DomainMismatch, EmptyInterval, EqualStates, RangeViolation, ResolutionTooCoarse
from sixvertex.pde import (
    DensityProfile,
    FluxModel,
    BumpFamily,
    delta_distance,
    entropy_residual,
    evolve_P,
    evolve_Q,
    finite_speed_check,
    glued_jump_field,
    riemann_breaks,
    riemann_field,
    riemann_solution,
    shock_speed,
)

F = FluxModel(1.5)


def profiles(domain="line", max_pieces=6):
    @st.composite
    def build(draw):
        k = draw(st.integers(1, max_pieces))
        widths = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
        vals = draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))
        a = draw(st.floats(-1.0, 1.0))
        b = a + np.concatenate([[0.0], np.cumsum(widths)])
        return DensityProfile(b, np.array(vals), domain)
    return build()


def l1_to_riemann(u: DensityProfile, theta, rho, t, lo, hi):
    e = u.breakpoints
    dx = float(e[1] - e[0])
    m = (e[:-1] >= lo) & (e[1:] <= hi)
    sub = np.linspace(0.0, 1.0, 41)
    exact = np.array([riemann_solution(theta, rho, (a + sub * dx) / t, F).mean() for a in e[:-1][m]])
    return float(np.sum(np.abs(u.values[m] - exact)) * dx)


class TestFlux:
    def test_endpoints(self):
        assert F.phi(0.0) == 0.0 and F.phi(1.0) == pytest.approx(1.0)
        assert F.phi_prime(0.0) == pytest.approx(1.5)
        assert F.phi_prime(1.0) == pytest.approx(1 / 1.5)

    def test_shape_on_grid(self):
        z = np.linspace(0, 1, 1001)
        assert np.all(F.phi_prime(z) > 0)
        assert np.all(F.phi_second(z) < 0)
        assert np.all(np.diff(F.phi(z)) > 0)

    def test_derivative_matches_difference(self):
        z = np.linspace(0.01, 0.99, 50)
        h = 1e-6
        assert np.allclose((F.phi(z + h) - F.phi(z - h)) / (2 * h), F.phi_prime(z), atol=1e-6)

    @given(st.floats(0.0, 1.0))
    def test_inverse(self, z):
        assert F.phi_prime_inverse(F.phi_prime(z)) == pytest.approx(z, abs=1e-9)

    def test_inverse_range(self):
        with pytest.raises(RangeViolation):
            F.phi_prime_inverse(2.0)

    def test_kappa_checked(self):
        with pytest.raises(RangeViolation):
            FluxModel(1.0)


class TestRiemann:
    def test_shock_speed(self):
        assert shock_speed(0.2, 0.8, F) == pytest.approx(0.974025974, abs=1e-9)
        assert shock_speed(0.0, 1.0, F) == pytest.approx(1.0)
        with pytest.raises(EqualStates):
            shock_speed(0.4, 0.4, F)

    def test_fan_value(self):
        assert float(riemann_solution(0.8, 0.2, 1.0, F)) == pytest.approx(0.449489743, abs=1e-9)

    def test_shock_sides(self):
        assert float(riemann_solution(0.2, 0.8, 0.9, F)) == 0.2
        assert float(riemann_solution(0.2, 0.8, 1.0, F)) == 0.8

    def test_constant(self):
        assert np.all(riemann_solution(0.3, 0.3, np.linspace(-2, 2, 9), F) == 0.3)

    def test_range(self):
        with pytest.raises(RangeViolation):
            riemann_solution(1.2, 0.3, 0.0, F)

    def test_fan_edges(self):
        lo, hi = riemann_breaks(0.8, 0.2, F)
        assert lo == pytest.approx(0.765306122, abs=1e-9)
        assert hi == pytest.approx(1.239669421, abs=1e-9)
        xi = np.linspace(lo, hi, 20)
        g = riemann_solution(0.8, 0.2, xi, F)
        assert np.all(np.diff(g) < 0)
        assert np.allclose(F.phi_prime(g), xi)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(-3, 3))
    def test_values_between_states(self, a, b, xi):
        g = float(riemann_solution(a, b, xi, F))
        assert min(a, b) - 1e-12 <= g <= max(a, b) + 1e-12


class TestSolvers:
    def test_constant_torus_exact(self):
        prof = DensityProfile(np.array([0.0, 1.0]), np.array([0.37]), "torus")
        out = evolve_Q(prof, 2.0, dx=1 / 50, flux=F)
        assert np.max(np.abs(out.values - 0.37)) < 1e-14

    def test_constant_interior_line(self):
        out = evolve_P(DensityProfile(np.array([0.0, 4.0]), np.array([0.5])), 1.0, 1 / 100, F)
        e = out.breakpoints
        inside = (e[:-1] >= 1.6) & (e[1:] <= 4.0)
        assert np.max(np.abs(out.values[inside] - 0.5)) < 1e-12

    def test_riemann_shock_l1(self):
        for dx in (1 / 100, 1 / 400):
            u = evolve_P(DensityProfile.riemann(0.2, 0.8, 3.0), 1.0, dx, F)
            assert l1_to_riemann(u, 0.2, 0.8, 1.0, -1.0, 2.0) <= 2.0 * np.sqrt(dx)

    def test_mass_conserved_torus(self):
        prof = DensityProfile.from_function(lambda x: 0.5 + 0.3 * np.sin(2 * np.pi * x), 0, 1, 200, "torus")
        g = evolve_Q(prof, 1.0, dx=1 / 200, flux=F, keep_history=True)
        mass = g.u.sum(axis=1) / 200
        assert np.max(np.abs(np.diff(mass))) < 1e-12

    def test_mass_conserved_line(self):
        prof = DensityProfile(np.array([0.0, 0.5, 1.0, 1.5]), np.array([0.9, 0.1, 0.6]))
        out = evolve_P(prof, 1.0, 1 / 200, F)
        assert out.mass() == pytest.approx(prof.mass(), abs=1e-12)

    @given(profiles("torus"))
    def test_maximum_principle(self, prof):
        out = evolve_Q(prof, 0.3, dx=prof.period / 100, flux=F)
        assert out.values.min() >= prof.values.min() - 1e-12
        assert out.values.max() <= prof.values.max() + 1e-12

    @given(profiles("line"), st.floats(0.05, 0.5), st.floats(0.05, 0.5))
    def test_semigroup(self, prof, s, t):
        dx = 1 / 100
        direct = evolve_P(prof, s + t, dx, F)
        two = evolve_P(evolve_P(prof, t, dx, F), s, dx, F)
        tv = np.sum(np.abs(np.diff(np.concatenate([[0.0], prof.values, [0.0]]))))
        assert delta_distance(direct, two) <= 3 * dx * max(tv, 1.0)
        e = direct.breakpoints
        assert np.sum(np.abs(direct.values - two(0.5 * (e[1:] + e[:-1])))) * dx <= 3 * dx * tv + 1e-12

    def test_resolution(self):
        with pytest.raises(ResolutionTooCoarse):
            evolve_P(DensityProfile.riemann(0.2, 0.8, 1.0), 1.0, dx=0.5)

    def test_domains(self):
        with pytest.raises(DomainMismatch):
            evolve_Q(DensityProfile.riemann(0.2, 0.8, 1.0), 1.0)
        with pytest.raises(DomainMismatch):
            evolve_P(DensityProfile(np.array([0.0, 1.0]), np.array([0.5]), "torus"), 1.0)


class TestProfile:
    def test_validation(self):
        with pytest.raises(RangeViolation):
            DensityProfile(np.array([0.0, 1.0]), np.array([1.5]))
        with pytest.raises(RangeViolation):
            DensityProfile(np.array([1.0, 0.0]), np.array([0.5]))
        with pytest.raises(RangeViolation):
            DensityProfile(np.array([0.0, 1.0, 2.0]), np.array([0.5]))

    @given(profiles("line"))
    def test_text_roundtrip(self, prof):
        back = DensityProfile.from_text(prof.to_text())
        assert np.array_equal(back.breakpoints, prof.breakpoints)
        assert np.array_equal(back.values, prof.values)

    def test_torus_periodic(self):
        prof = DensityProfile(np.array([0.0, 0.5, 1.0]), np.array([0.2, 0.7]), "torus")
        assert prof(1.25) == prof(0.25) == 0.2
        assert prof.cumulative(2.0) == pytest.approx(2 * prof.mass())


class TestDelta:
    def test_identical(self):
        u = DensityProfile(np.array([0.0, 1.0, 3.0]), np.array([0.3, 0.6]))
        assert delta_distance(u, u) == 0.0

    def test_unit_gap(self):
        u = DensityProfile(np.array([0.0, 1.0]), np.array([1.0]))
        v = DensityProfile(np.array([0.0, 1.0]), np.array([0.0]))
        assert delta_distance(u, v) == pytest.approx(1.0)

    def test_domain_mismatch(self):
        u = DensityProfile(np.array([0.0, 1.0]), np.array([1.0]))
        v = DensityProfile(np.array([0.0, 1.0]), np.array([1.0]), "torus")
        with pytest.raises(DomainMismatch):
            delta_distance(u, v)

    @given(profiles("line"), profiles("line"))
    def test_symmetric_and_triangle(self, u, v):
        w = DensityProfile(np.array([0.0, 1.0]), np.array([0.5]))
        assert delta_distance(u, v) == pytest.approx(delta_distance(v, u))
        assert delta_distance(u, v) <= delta_distance(u, w) + delta_distance(w, v) + 1e-12

    @given(profiles("line", 4), profiles("line", 4), st.floats(0.1, 1.0))
    def test_contraction(self, u, v, t):
        dx = 1 / 100
        uu, vv = evolve_P(u, t, dx, F), evolve_P(v, t, dx, F)
        assert delta_distance(uu, vv) <= delta_distance(u, v) + 2 * dx


class TestEntropy:
    def test_constant(self):
        prof = DensityProfile(np.array([0.0, 1.0]), np.array([0.4]), "torus")
        g = evolve_Q(prof, 0.5, dx=1 / 100, flux=F, keep_history=True)
        assert entropy_residual(g, F) >= -1e-10

    def test_shock_vs_glued(self):
        fam = BumpFamily.dyadic((-1.0, 2.0), (0.0, 1.0), levels=2)
        ok = entropy_residual(riemann_field(0.2, 0.8, F), F, fam, x_range=(-1, 2), t_max=1.0)
        bad = entropy_residual(glued_jump_field(0.8, 0.2, shock_speed(0.2, 0.8, F)), F, fam,
                               x_range=(-1, 2), t_max=1.0)
        assert ok >= -1e-6
        assert bad < -1e-3

    def test_closed_form_needs_ranges(self):
        with pytest.raises(RangeViolation):
            entropy_residual(riemann_field(0.2, 0.8, F), F)

    def test_family(self):
        fam = BumpFamily.dyadic((0.0, 1.0), (0.0, 1.0), levels=2)
        assert len(fam) == 3 * 3 + 5 * 5
        assert np.all(fam.rx > 0)


class TestFiniteSpeed:
    def test_identical(self):
        u = DensityProfile(np.array([-12.0, 0.0, 12.0]), np.array([0.3, 0.7]))
        assert finite_speed_check(u, u, -12, 12, 1.0)

    def test_outside_difference(self):
        core = [0.4, 0.6]
        u = DensityProfile(np.array([-14.0, -10.0, 0.0, 10.0, 14.0]), np.array([0.9] + core + [0.1]))
        v = DensityProfile(np.array([-14.0, -10.0, 0.0, 10.0, 14.0]), np.array([0.0] + core + [1.0]))
        assert finite_speed_check(u, v, -10, 10, 1.0, c=2 * F.kappa)

    def test_empty(self):
        u = DensityProfile(np.array([0.0, 1.0]), np.array([0.5]))
        with pytest.raises(EmptyInterval):
            finite_speed_check(u, u, 0.0, 1.0, 1.0)
