import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import multiclass_mc, tally
from sixvertex import (
    BadThresholds,
    OrderViolation,
    ParticleConfiguration,
    RangeViolation,
    StepRandomness,
    TooFewSamples,
    bernoulli_occupancy,
    line_config,
    make_params,
    spawn_seed,
)
from sixvertex.dynamics import step_line_keyed
from sixvertex.multiclass import (
    CoupledSystem,
    CouplingAudit,
    MultiClassConfiguration,
    assign_classes,
    higher_rank_step,
    project_classes,
    step_multiclass,
    step_multiclass_keyed,
    tagged_speed_tail,
)
from sixvertex.oracles import line_law_vertex, multiclass_law_coins, multiclass_law_vertex
from sixvertex.stats import multinomial_check

P = make_params(0.25, 0.5)


def rnd2(chi1, chi2, jump1, jump2, lo=0):
    return StepRandomness(1, lo, np.array([chi1, chi2], np.uint8), np.array([jump1, jump2], np.int64))


class TestConfiguration:
    def test_sorted_and_validated(self):
        c = MultiClassConfiguration([5, 1], [1, 2], 2)
        assert list(c.positions) == [1, 5] and list(c.classes) == [2, 1]
        with pytest.raises(RangeViolation):
            MultiClassConfiguration([1, 1], [1, 2], 2)
        with pytest.raises(RangeViolation):
            MultiClassConfiguration([1], [3], 2)

    def test_occupancy_roundtrip(self):
        occ = [0, 2, 1, 0, 2]
        c = MultiClassConfiguration.from_occupancy(occ, 2, offset=-2)
        assert list(c.occupancy(-2, 3)) == occ
        assert list(c.class_positions(2)) == [-1, 2]
        assert c.single_class().count == 3


class TestStep:
    def test_skip_stationary_lower_class(self):
        # class 1 at site 1 stays; class 2 jumping one site passes over it
        rnd = rnd2([1] * 4, [0] * 4, [1] * 4, [1] * 4)
        out = step_multiclass(MultiClassConfiguration([0, 1], [2, 1], 2), rnd)
        assert list(out.occupancy(0, 3)) == [0, 1, 2]

    def test_lower_class_sees_hole(self):
        # class 1 treats class 2 as empty and lands on it; class 2 is pushed on
        rnd = rnd2([0] * 4, [1] * 4, [1] * 4, [1] * 4)
        out = step_multiclass(MultiClassConfiguration([0, 1], [1, 2], 2), rnd)
        assert list(out.occupancy(0, 3)) == [0, 1, 2]

    def test_jumped_over_stays(self):
        # class 1 passes site 1, so the class-2 particle there stays despite its coin
        rnd = rnd2([0] * 5, [0] * 5, [2] * 5, [1] * 5)
        out = step_multiclass(MultiClassConfiguration([0, 1], [1, 2], 2), rnd)
        assert list(out.occupancy(0, 3)) == [0, 2, 1]

    def test_moving_lower_class_caps(self):
        # class 2 may not pass the start of a moving class-1 particle
        rnd = rnd2([0] * 8, [0] * 8, [3] * 8, [5] * 8)
        out = step_multiclass(MultiClassConfiguration([0, 2], [2, 1], 2), rnd)
        assert list(out.occupancy(0, 6)) == [0, 0, 2, 0, 0, 1]

    @given(st.lists(st.integers(-20, 20), unique=True, min_size=1, max_size=10), st.integers(0, 2**31))
    def test_single_class_is_line(self, pos, seed):
        pos = sorted(pos)
        mc = step_multiclass_keyed(MultiClassConfiguration(pos, [1] * len(pos), 1), P, seed, 3)
        line = step_line_keyed(line_config(pos), P, seed, 3)
        assert np.array_equal(mc.positions, line.positions)

    @given(st.lists(st.integers(0, 3), min_size=2, max_size=30), st.integers(0, 2**31))
    def test_conserves_each_class(self, occ, seed):
        c = MultiClassConfiguration.from_occupancy(occ, 3)
        out = step_multiclass_keyed(c, P, seed, 1)
        for r in (1, 2, 3):
            assert out.class_positions(r).size == c.class_positions(r).size
            assert np.all(out.class_positions(r) >= c.class_positions(r))

    @pytest.mark.parametrize("occ", [(1, 2, 0), (2, 1, 0, 0), (1, 2, 0, 1, 0, 0), (2, 0, 2, 1, 0)])
    def test_oracles_agree(self, occ):
        a = multiclass_law_vertex(occ, 2, P)
        b = multiclass_law_coins(occ, 2, P)
        assert set(a) == set(b)
        assert all(a[k] == pytest.approx(b[k], abs=1e-12) for k in a)

    @pytest.mark.parametrize("occ", [(2, 1, 0, 0), (1, 2, 0, 1, 0, 0)])
    def test_law(self, occ):
        n = 30_000
        assert multinomial_check(multiclass_mc(occ, 2, n, seed=4), multiclass_law_vertex(occ, 2, P), n) == []


class TestAssign:
    def test_equal_is_class_one(self):
        c = line_config([0, 3, 4])
        j = assign_classes(c, [c])
        assert list(j.classes) == [1, 1, 1]

    def test_single_discrepancy(self):
        eta = ParticleConfiguration.from_occupancy([1, 0])
        xi = ParticleConfiguration.from_occupancy([1, 1])
        j = assign_classes(eta, [xi])
        assert list(j.occupancy(0, 2)) == [1, 2]

    def test_not_nested(self):
        with pytest.raises(OrderViolation):
            assign_classes(line_config([0]), [line_config([0, 1]), line_config([1, 2])])

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=25), st.lists(st.integers(0, 4), min_size=1, max_size=25))
    def test_matches_set_differences(self, a, b):
        # level-set families: model m holds the sites with label <= m
        n = 3
        W = min(len(a), len(b))
        a, b = np.array(a[:W]), np.array(b[:W])
        etas = [ParticleConfiguration.from_occupancy((a >= 1) & (a <= m)) for m in range(1, n + 1)]
        xis = [ParticleConfiguration.from_occupancy((b >= 1) & (b <= m)) for m in range(1, n + 1)]
        j = assign_classes(etas, xis)
        expected = {}
        for x in range(W):
            i = next((m + 1 for m in range(n) if x in set(etas[m].positions.tolist())), n + 1)
            jj = next((m + 1 for m in range(n) if x in set(xis[m].positions.tolist())), n + 1)
            if i <= n or jj <= n:
                expected[x] = i + jj - 1
        assert dict(zip(j.positions.tolist(), j.classes.tolist())) == expected
        assert j.n == 2 * n


class TestProject:
    def test_full_threshold(self):
        c = MultiClassConfiguration([0, 2, 3], [1, 3, 2], 3)
        p = project_classes(c, [3])
        assert p.n == 1 and list(p.classes) == [1, 1, 1]

    def test_first_class_only(self):
        c = MultiClassConfiguration([0, 2, 3], [1, 3, 2], 3)
        p = project_classes(c, [1])
        assert list(p.positions) == [0]

    def test_merge(self):
        c = MultiClassConfiguration([0, 1, 2, 3], [1, 2, 3, 4], 4)
        p = project_classes(c, [2, 3])
        assert list(p.positions) == [0, 1, 2] and list(p.classes) == [1, 1, 2]

    @pytest.mark.parametrize("th", [[], [0], [2, 2], [1, 5], [3, 1]])
    def test_bad(self, th):
        with pytest.raises(BadThresholds):
            project_classes(MultiClassConfiguration([0], [1], 4), th)

    @pytest.mark.parametrize("occ,th", [((1, 3, 2, 0), [2]), ((3, 1, 2, 0, 0), [1, 2]), ((2, 3, 1, 0), [1])])
    def test_exact_projection_of_law(self, occ, th):
        # push the 3-class law forward and compare with the projected system's law
        full = multiclass_law_vertex(occ, 3, P)
        pushed: dict = {}
        t = np.asarray(th)

        def proj(c):
            return 0 if c == 0 or c > t[-1] else int(np.searchsorted(t, c) + 1)

        for (sites, ex), p in full.items():
            key = (tuple(proj(c) for c in sites), proj(ex))
            pushed[key] = pushed.get(key, 0.0) + p
        direct = multiclass_law_vertex(tuple(proj(c) for c in occ), len(th), P)
        assert set(k for k, v in pushed.items() if v > 1e-15) == set(direct)
        assert all(pushed[k] == pytest.approx(direct[k], abs=1e-12) for k in direct)

    def test_step_then_project(self):
        n = 30_000
        occ, th = (3, 1, 2, 0, 0), [1, 2]
        mc = multiclass_mc(occ, 3, n, seed=8)
        t = np.asarray(th)

        def proj(c):
            return 0 if c == 0 or c > t[-1] else int(np.searchsorted(t, c) + 1)

        counts: dict = {}
        for (sites, ex), k in mc.items():
            key = (tuple(proj(c) for c in sites), proj(ex))
            counts[key] = counts.get(key, 0) + k
        law = multiclass_law_vertex(tuple(proj(c) for c in occ), 2, P)
        assert multinomial_check(counts, law, n) == []


class TestHigherRank:
    def test_equal_stays_equal(self):
        c = ParticleConfiguration.from_occupancy(bernoulli_occupancy(0.5, 0, 60, 1))
        sys = CoupledSystem.from_models(c, [c])
        for t in range(1, 50):
            sys = higher_rank_step(sys, P, 2, t)
            assert np.array_equal(sys.etas[0].positions, sys.xis[0].positions)

    def test_single_discrepancy_non_increasing(self):
        for r in range(5):
            xi = ParticleConfiguration.from_occupancy(bernoulli_occupancy(0.5, 0, 200, spawn_seed(3, r)))
            drop = xi.positions[xi.count // 2]
            eta = ParticleConfiguration(np.setdiff1d(xi.positions, [drop]), "line")
            sys = CoupledSystem.from_models(eta, [xi])
            audit = CouplingAudit()
            prev = 1
            for t in range(1, 1001):
                sys = higher_rank_step(sys, P, spawn_seed(4, r), t, audit)
                d = np.setxor1d(sys.etas[0].positions, sys.xis[0].positions).size
                assert d <= prev
                prev = d
            assert audit.clean

    @given(st.lists(st.integers(0, 1), min_size=5, max_size=60), st.lists(st.integers(0, 1), min_size=5, max_size=60),
           st.integers(0, 2**31))
    def test_rank_one_audit_clean(self, a, b, seed):
        W = min(len(a), len(b))
        eta = ParticleConfiguration.from_occupancy(a[:W])
        xi = ParticleConfiguration.from_occupancy(b[:W])
        sys = CoupledSystem.from_models(eta, [xi])
        audit = CouplingAudit()
        for t in range(1, 20):
            sys = higher_rank_step(sys, P, seed, t, audit)
        assert audit.clean

    def test_marginal_law(self):
        n = 20_000
        eta, xi = line_config([0, 2]), line_config([1, 2, 4])
        sys = CoupledSystem.from_models(eta, [xi])
        e_out, x_out = [], []
        for r in range(n):
            out = higher_rank_step(sys, P, spawn_seed(9, r), 1)
            e_out.append(tuple(int(v) for v in np.minimum(out.etas[0].positions, 7)))
            x_out.append(tuple(int(v) for v in np.minimum(out.xis[0].positions, 7)))
        assert multinomial_check(tally(e_out), line_law_vertex((0, 2), 0, 7, P), n) == []
        assert multinomial_check(tally(x_out), line_law_vertex((1, 2, 4), 0, 7, P), n) == []

    def test_rejects_unnested(self):
        with pytest.raises(OrderViolation):
            CoupledSystem.from_models(line_config([0]), [line_config([0, 1]), line_config([2])])


class TestSpeedTail:
    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            tagged_speed_tail(np.ones(100))

    def test_bounds(self):
        d = np.random.default_rng(0).geometric(0.5, size=100_000)
        est = tagged_speed_tail(d, 0.5, 12)
        assert est.tail[0] <= 1.0
        assert est.bound[3] == pytest.approx(0.125)
        assert est.ok

    def test_flags_heavy_tail(self):
        d = np.random.default_rng(0).geometric(0.3, size=100_000)
        est = tagged_speed_tail(d, 0.5, 12)
        assert not est.ok and 3 in est.violations
