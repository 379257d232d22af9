import numpy as np
import pytest

from hconvex.lp import LpProblem, solve_lp, verify_solution
from hconvex.rng import stream

from lp_oracle import brute_force_optimum



def test_one_dimensional_example():
    p = LpProblem("min", [-1.0], [[1.0]], ("<=",), [3.0])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.primal[0] == pytest.approx(3.0, abs=1e-9)
    assert sol.objective == pytest.approx(-3.0, abs=1e-9)
    assert sol.dual[0] == pytest.approx(-1.0, abs=1e-9)


def test_allocation_toy_with_duals():
    # serve classes with penalties l = (2, 1), one leg of capacity 5,
    # demands z = (4, 3): optimal service w = (4, 1)
    z = np.array([4.0, 3.0])
    l = np.array([2.0, 1.0])
    p = LpProblem(
        "min",
        -l,
        [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
        ("<=", "<=", "<="),
        [5.0, z[0], z[1]],
    )
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert np.allclose(sol.primal, [4.0, 1.0], atol=1e-9)
    assert l @ z + sol.objective == pytest.approx(2.0, abs=1e-9)  # the rejection penalty
    # one more unit of capacity serves one more unit of the cheap class
    assert sol.dual[0] == pytest.approx(-1.0, abs=1e-9)
    # demand rows: w1 <= 4 binds with shadow -1 (2 - 1 swap), w2 <= 3 slack
    assert sol.dual[1] == pytest.approx(-1.0, abs=1e-9)
    assert sol.dual[2] == pytest.approx(0.0, abs=1e-9)


def test_infeasible_system():
    p = LpProblem("min", [1.0], [[1.0]], ("<=",), [-1.0])
    sol = solve_lp(p)
    assert sol.status == "infeasible"
    assert sol.primal is None


def test_unbounded():
    p = LpProblem("min", [-1.0, 0.0], [[0.0, 1.0]], ("<=",), [1.0])
    sol = solve_lp(p)
    assert sol.status == "unbounded"


def test_equality_and_ge_rows():
    # min x + y  s.t. x + y = 2, x >= 0.5
    p = LpProblem("min", [1.0, 1.0], [[1.0, 1.0], [1.0, 0.0]], ("=", ">="), [2.0, 0.5])
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    assert sol.dual[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.dual[1] == pytest.approx(0.0, abs=1e-9)


def test_max_sense_with_capacity():
    # two fare classes on one leg: the cheap class is cut to fill capacity
    p = LpProblem(
        "max",
        [5.0, 1.0],
        [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
        ("<=", "<=", "<="),
        [10.0, 8.0, 8.0],
    )
    sol = solve_lp(p)
    assert np.allclose(sol.primal, [8.0, 2.0], atol=1e-9)
    assert sol.objective == pytest.approx(42.0, abs=1e-9)
    assert sol.dual[0] == pytest.approx(1.0, abs=1e-9)  # bid price of the leg
    assert sol.dual[1] == pytest.approx(4.0, abs=1e-9)


def test_variable_bounds():
    # x in [1, 2], maximize x
    p = LpProblem("max", [1.0], np.zeros((0, 1)), (), [], bounds=((1.0, 2.0),))
    sol = solve_lp(p)
    assert sol.primal[0] == pytest.approx(2.0, abs=1e-9)
    p2 = LpProblem("min", [1.0], np.zeros((0, 1)), (), [], bounds=((1.0, 2.0),))
    assert solve_lp(p2).primal[0] == pytest.approx(1.0, abs=1e-9)


def test_degenerate_cycling_guard():
    # classic cycling-prone data (degenerate pivots) still terminates
    p = LpProblem(
        "min",
        [-0.75, 150.0, -0.02, 6.0],
        [
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ],
        ("<=", "<=", "<="),
        [0.0, 0.0, 1.0],
    )
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)


def test_certificates_on_optimal_solves():
    rng = stream(51, "lp")
    for trial in range(50):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        a = rng.integers(-5, 6, size=(m, n)).astype(float)
        b = rng.integers(0, 6, size=m).astype(float)
        c = rng.integers(-5, 6, size=n).astype(float)
        p = LpProblem("min", c, a, ("<=",) * m, b)
        sol = solve_lp(p)
        if sol.status != "optimal":
            continue
        res = verify_solution(p, sol)
        assert res["primal_residual"] <= 1e-7
        assert res["dual_residual"] <= 1e-7
        assert res["cs_max"] <= 1e-6
        assert res["gap_rel"] <= 1e-6


def test_random_lps_match_vertex_enumeration():
    rng = stream(52, "lp")
    counts = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    total = 200
    for trial in range(total):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 8))
        c = rng.integers(-5, 6, size=n).astype(float)
        if trial % 5 < 3:
            # feasible and bounded by construction: <= rows with b >= 0
            # (origin feasible) plus a simplex cap
            a = np.vstack([rng.integers(-5, 6, size=(m, n)).astype(float), np.ones(n)])
            b = np.concatenate([rng.integers(0, 6, size=m).astype(float),
                                [float(rng.integers(1, 11))]])
            senses = ("<=",) * (m + 1)
            sense = "min" if rng.random() < 0.5 else "max"
        else:
            a = rng.integers(-5, 6, size=(m, n)).astype(float)
            b = rng.integers(-5, 6, size=m).astype(float)
            senses = tuple(rng.choice(["<=", "<=", ">=", "="]) for _ in range(m))
            sense = "min" if rng.random() < 0.5 else "max"
        p = LpProblem(sense, c, a, senses, b)
        sol = solve_lp(p)
        counts[sol.status] += 1
        if sol.status == "optimal":
            ref, _ = brute_force_optimum(p)
            assert ref is not None
            assert sol.objective == pytest.approx(ref, abs=1e-6)
        elif sol.status == "infeasible":
            ref, _ = brute_force_optimum(p)
            assert ref is None
        else:  # unbounded: boxing the variables must leave the box active
            box = 50.0
            a2 = np.vstack([a, np.eye(n)])
            senses2 = senses + ("<=",) * n
            b2 = np.concatenate([b, np.full(n, box)])
            sol2 = solve_lp(LpProblem(sense, c, a2, senses2, b2))
            assert sol2.status == "optimal"
            assert np.max(sol2.primal) >= box - 1e-6
    # the generator must actually exercise the optimal path heavily
    assert counts["optimal"] >= 80, counts
