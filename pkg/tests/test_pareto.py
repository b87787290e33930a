import math
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hlsdse.cdfg import QorVector
from hlsdse.dse.io import read_front
from hlsdse.dse.pareto import (
    DeviceCapacities,
    Objectives,
    adrs,
    crowding_distance,
    dominates,
    fast_non_dominated_sort,
    pareto_filter,
    select_best,
)

import oracles
from conftest import FIXTURES

points = st.lists(
    st.tuples(st.integers(1, 20).map(lambda v: v / 10), st.integers(1, 20).map(float)),
    min_size=1,
    max_size=40,
)


def objs(pairs):
    return [Objectives(a, l) for a, l in pairs]


def pairs(front):
    return [(o.area, o.latency) for o in front]


class TestDominance:
    def test_examples(self):
        assert dominates(Objectives(0.2, 100), Objectives(0.3, 200))
        assert dominates(Objectives(0.2, 100), Objectives(0.2, 150))
        assert not dominates(Objectives(0.2, 100), Objectives(0.2, 100))
        assert not dominates(Objectives(0.2, 200), Objectives(0.3, 100))

    @given(points)
    def test_irreflexive_antisymmetric(self, pts):
        o = objs(pts)
        for a in o:
            assert not dominates(a, a)
            for b in o:
                assert not (dominates(a, b) and dominates(b, a))


class TestFilter:
    def test_chain_collapses(self):
        assert pairs(pareto_filter(objs([(0.2, 100), (0.3, 200), (0.25, 150)]))) == [(0.2, 100)]

    def test_duplicates_keep_first(self):
        a, b = Objectives(0.1, 5), Objectives(0.1, 5)
        assert pareto_filter([a, b])[0] is a

    @given(points)
    def test_matches_brute_force(self, pts):
        got = pareto_filter(objs(pts))
        assert pairs(got) == [pts[i] for i in oracles.brute_pareto(pts)]

    @given(points, points)
    def test_properties(self, pts, extra):
        o = objs(pts)
        front = pareto_filter(o)
        assert all(any(f is x for x in o) for f in front)
        assert all(not dominates(x, f) for f in front for x in o)
        assert pareto_filter(front) == front
        # every point is dominated by or equal to a front member
        for x in o:
            assert any(dominates(f, x) or (f.area, f.latency) == (x.area, x.latency) for f in front)


class TestAdrs:
    def test_identity(self):
        f = objs([(0.1, 10), (0.2, 5)])
        assert adrs(f, f) == 0.0

    def test_singleton(self):
        assert adrs([Objectives(1.0, 1.0)], [Objectives(2.0, 1.0)]) == float(oracles.ADRS_SINGLETON)

    def test_fixture_pair(self):
        ref = read_front(os.path.join(FIXTURES, "sa_mvt_reference.csv"))
        app = read_front(os.path.join(FIXTURES, "sa_mvt_approx.csv"))
        exact = oracles.exact_adrs(pairs(o.objectives for o in ref), pairs(o.objectives for o in app))
        assert exact == oracles.ADRS_SA_MVT
        assert adrs(ref, app) == pytest.approx(0.5620, abs=1e-4)
        assert round(adrs(ref, app), 4) == 0.5620

    @given(points, points)
    def test_matches_exact_arithmetic(self, ref, app):
        got = adrs(objs(ref), objs(app))
        assert got == pytest.approx(float(oracles.exact_adrs(ref, app)), rel=1e-12, abs=1e-15)

    @given(points, points, points)
    def test_superset_never_worse(self, ref, app, extra):
        assert adrs(objs(ref), objs(app + extra)) <= adrs(objs(ref), objs(app)) + 1e-12

    @given(points)
    def test_reference_contained(self, ref):
        assert adrs(objs(ref), objs(ref)) == 0.0

    def test_empty_and_zero_denominator(self):
        with pytest.raises(ValueError):
            adrs([], objs([(1, 1)]))
        with pytest.raises(ValueError):
            adrs(objs([(1, 1)]), [])
        with pytest.raises(ZeroDivisionError):
            adrs(objs([(1, 1)]), objs([(0.0, 1)]))


class TestArea:
    def test_mean_utilization(self):
        q = QorVector(latency=10, lut=230_400 / 2, ff=0, bram=312, dsp=0)
        assert Objectives.from_qor(q, DeviceCapacities()).area == pytest.approx(0.375)

    def test_missing_metric(self):
        with pytest.raises(ValueError, match="lacks"):
            Objectives.from_qor(QorVector(latency=10, lut=1), DeviceCapacities())

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            DeviceCapacities.from_dict({"lut": 0, "ff": 1, "bram": 1, "dsp": 1})
        with pytest.raises(ValueError):
            DeviceCapacities.from_dict({"uram": 1})


class TestSorting:
    def test_fronts(self):
        o = objs([(1, 1), (2, 2), (3, 3), (1, 3), (3, 1)])
        assert fast_non_dominated_sort(o) == [[0], [1, 3, 4], [2]]

    @given(points)
    def test_partition_and_first_front(self, pts):
        o = objs(pts)
        fronts = fast_non_dominated_sort(o)
        assert sorted(i for f in fronts for i in f) == list(range(len(o)))
        assert {(o[i].area, o[i].latency) for i in fronts[0]} == {(f.area, f.latency) for f in pareto_filter(o)}
        for r in range(1, len(fronts)):
            for i in fronts[r]:
                assert any(dominates(o[j], o[i]) for j in fronts[r - 1])

    def test_crowding_boundaries_infinite(self):
        o = objs([(1, 4), (2, 3), (3, 2), (4, 1)])
        cd = crowding_distance(o, [0, 1, 2, 3])
        assert math.isinf(cd[0]) and math.isinf(cd[3])
        assert cd[1] == pytest.approx(2 / 3 + 2 / 3)

    def test_select_best_prefers_rank(self):
        o = objs([(5, 5), (1, 1), (2, 2)])
        assert select_best(o, 2) == [1, 2]


def test_large_random_sets_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pts = [tuple(map(float, r)) for r in rng.integers(1, 60, size=(500, 2))]
        assert pairs(pareto_filter(objs(pts))) == [pts[i] for i in oracles.brute_pareto(pts)]
