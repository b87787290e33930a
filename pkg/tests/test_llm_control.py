import pytest
from hypothesis import given, strategies as st

from hlsdse.cdfg import Configuration, DesignSpace, Knob
from hlsdse.llm.control import PheromoneMatrix, TempController

import oracles

SPACE = DesignSpace((Knob("A", (1, 2, 4)), Knob("B", ("x", "y"))))


class TestPheromone:
    def test_elite_update(self):
        m = PheromoneMatrix(SPACE)
        m.evaporate(0.9)
        m.deposit([Configuration((2, "x")), Configuration((2, "y"))], 0.1)
        assert m.value("A", 2) == pytest.approx(oracles.PHEROMONE_ELITE, abs=1e-15)
        assert m.value("A", 1) == pytest.approx(0.9)
        assert m.value("B", "x") == m.value("B", "y")
        assert m.to_dict()["B"] == {'"x"': m.value("B", "x"), '"y"': m.value("B", "y")}

    @given(st.integers(1, 30), st.floats(0.05, 1.0))
    def test_geometric_decay(self, k, rho):
        m = PheromoneMatrix(SPACE, 2.0)
        for _ in range(k):
            m.evaporate(rho)
        assert m.value("A", 4) == pytest.approx(2.0 * rho**k, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            PheromoneMatrix(SPACE, -1)
        with pytest.raises(ValueError):
            PheromoneMatrix(SPACE).evaporate(0.0)


class TestTemperature:
    def test_decays_after_stagnation(self):
        c = TempController(1.0, 0.2, 3)
        assert [c.update(False) for _ in range(3)] == [1.0, 1.0, 0.8]
        assert [c.update(False) for _ in range(3)] == [0.8, 0.8, pytest.approx(0.6)]

    def test_improvement_resets_counter(self):
        c = TempController(1.0, 0.2, 3)
        c.update(False)
        c.update(False)
        c.update(True)
        assert c.n_ost == 0
        c.update(False)
        c.update(False)
        assert c.t == 1.0

    @given(st.integers(1, 5), st.integers(1, 40))
    def test_exact_steps(self, limit, stagnant):
        c = TempController(10.0, 0.25, limit)
        for _ in range(stagnant):
            c.update(False)
        assert c.t == pytest.approx(10.0 - 0.25 * (stagnant // limit), abs=1e-12)

    def test_floor(self):
        c = TempController(0.3, 0.2, 1, floor=0.05)
        assert [c.update(False) for _ in range(3)] == [pytest.approx(0.1), 0.05, 0.05]

    def test_validation(self):
        with pytest.raises(ValueError):
            TempController(1.0, -0.1)
        with pytest.raises(ValueError):
            TempController(1.0, 0.1, 0)
