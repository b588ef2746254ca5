import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from onlinefw.errors import (
    ConvergenceWarning,
    InfeasibleDomainError,
    NumericError,
    ParameterError,
    ParseError,
    ShapeError,
)
from onlinefw.oracles import (
    Ball,
    EntryGradient,
    FlowPolytope,
    Simplex,
    TraceNormBall,
    UniformMatroid,
    format_flow_graph,
    lmo_ball,
    lmo_flow_dag,
    lmo_simplex,
    lmo_trace_ball,
    lmo_uniform_matroid,
    parse_flow_graph,
    power_iteration_top_pair,
    project_ball,
    project_simplex,
    project_trace_ball,
    random_flow_polytope,
)

from reference import best_subset_value, dag_path_costs, jacobi_singular_values, simplex_projection_kkt

TRIANGLE = FlowPolytope(3, ((0, 1), (1, 2), (0, 2)), 0, 2)


class TestSimplex:
    def test_argmin(self):
        np.testing.assert_array_equal(lmo_simplex([3, -1, 2]).dense, [0, 1, 0])

    def test_tie_lowest_index(self):
        np.testing.assert_array_equal(lmo_simplex([0, 0]).dense, [1, 0])

    def test_random_matches_vertices(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = rng.standard_normal(8)
            assert c @ lmo_simplex(c).dense == pytest.approx(c.min(), abs=1e-12)

    def test_errors(self):
        with pytest.raises(ParameterError):
            lmo_simplex([])
        with pytest.raises(NumericError):
            lmo_simplex([1.0, math.nan])


class TestBall:
    def test_example(self):
        np.testing.assert_allclose(lmo_ball([3, 4], 2).dense, [-1.2, -1.6])

    def test_zero_cost(self):
        np.testing.assert_array_equal(lmo_ball([0, 0], 1).dense, [1, 0])

    def test_random_optimum(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            c = rng.standard_normal(6)
            r = rng.uniform(0.1, 4)
            assert abs(c @ lmo_ball(c, r).dense + r * np.linalg.norm(c)) <= 1e-10

    def test_errors(self):
        with pytest.raises(NumericError):
            lmo_ball([math.nan, 1.0], 1.0)
        with pytest.raises(ParameterError):
            lmo_ball([1.0], 0.0)


class TestFlow:
    def test_cheaper_two_hop(self):
        x = lmo_flow_dag(TRIANGLE, [1, 1, 3]).dense
        np.testing.assert_array_equal(x, [1, 1, 0])

    def test_tie_value(self):
        c = np.array([1.0, 1.0, 2.0])
        assert c @ lmo_flow_dag(TRIANGLE, c).dense == 2.0

    def test_negative_costs(self):
        c = np.array([-5.0, 1.0, -1.0])
        np.testing.assert_array_equal(lmo_flow_dag(TRIANGLE, c).dense, [1, 1, 0])

    @pytest.mark.parametrize("seed", range(20))
    def test_random_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_flow_polytope(8, edge_prob=0.5, seed=seed)
        c = rng.standard_normal(spec.dim)
        best = min(dag_path_costs(spec.n_nodes, spec.edges, spec.source, spec.sink, c))
        assert abs(c @ spec.lmo(c).dense - best) <= 1e-12

    def test_no_path(self):
        with pytest.raises(InfeasibleDomainError):
            FlowPolytope(3, ((0, 1),), 0, 2)

    def test_cycle_rejected(self):
        with pytest.raises(ParameterError):
            FlowPolytope(3, ((0, 1), (1, 0), (1, 2)), 0, 2)

    def test_cost_length(self):
        with pytest.raises(ShapeError):
            lmo_flow_dag(TRIANGLE, [1.0, 2.0])

    def test_diameter(self):
        assert TRIANGLE.max_path_length == 2
        assert TRIANGLE.diameter == pytest.approx(2.0)

    def test_contains(self):
        assert TRIANGLE.contains([0.5, 0.5, 0.5])
        assert not TRIANGLE.contains([1.0, 0.0, 1.0])


class TestFlowText:
    def test_roundtrip(self):
        spec = random_flow_polytope(6, seed=3)
        again = parse_flow_graph(format_flow_graph(spec))
        assert again.edges == spec.edges
        assert (again.n_nodes, again.source, again.sink) == (spec.n_nodes, spec.source, spec.sink)

    def test_bare_numbers_and_comments(self):
        spec = parse_flow_graph("3 3 0 2  # header\n0 1\n1 2\n\n0 2\n")
        assert spec.edges == TRIANGLE.edges

    def test_edge_count_mismatch(self):
        with pytest.raises(ParseError):
            parse_flow_graph("nodes 3 edges 2 0 2\n0 1\n")

    def test_bad_edge_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_flow_graph("nodes 3 edges 2 0 2\n0 1\n1 x\n")

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_flow_graph("# nothing\n")


class TestMatroid:
    def test_example(self):
        np.testing.assert_array_equal(lmo_uniform_matroid(3, 2, [-3, 1, -1]).dense, [1, 0, 1])

    def test_all_positive_is_empty(self):
        np.testing.assert_array_equal(lmo_uniform_matroid(3, 2, [1, 2, 3]).dense, [0, 0, 0])

    @pytest.mark.parametrize("seed", range(10))
    def test_random_matches_enumeration(self, seed):
        c = np.random.default_rng(seed).standard_normal(10)
        got = c @ lmo_uniform_matroid(10, 4, c).dense
        assert abs(got - best_subset_value(c, 4)) <= 1e-12

    def test_errors(self):
        with pytest.raises(ShapeError):
            lmo_uniform_matroid(3, 2, [1.0, 2.0])
        with pytest.raises(ParameterError):
            UniformMatroid(3, 4)
        with pytest.raises(ParameterError):
            lmo_uniform_matroid(3, 0, [1.0, 2.0, 3.0])


class TestPowerIteration:
    def test_diagonal(self):
        top = power_iteration_top_pair(np.diag([2.0, 1.0]), tol=1e-10)
        assert abs(top.sigma - 2.0) <= 1e-5
        assert abs(abs(top.u[0]) - 1) <= 1e-5 and abs(abs(top.v[0]) - 1) <= 1e-5

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal(3), rng.standard_normal(4)
        top = power_iteration_top_pair(np.outer(a, b))
        assert abs(top.sigma - np.linalg.norm(a) * np.linalg.norm(b)) <= 1e-5

    @pytest.mark.parametrize("seed", range(3))
    def test_random_against_jacobi(self, seed):
        G = np.random.default_rng(seed).standard_normal((50, 80))
        ref = jacobi_singular_values(G)[0]
        top = power_iteration_top_pair(G, tol=1e-7, max_iters=20000)
        assert abs(top.sigma - ref) / ref <= 1e-5

    def test_residual_small(self):
        G = np.random.default_rng(4).standard_normal((20, 15))
        top = power_iteration_top_pair(G, tol=1e-6, max_iters=20000)
        assert top.converged
        assert np.linalg.norm(G @ top.v - top.sigma * top.u) <= 10 * 1e-6 * top.sigma

    def test_sparse_inputs_agree(self):
        rng = np.random.default_rng(5)
        dense = np.zeros((30, 40))
        rows, cols = rng.integers(0, 30, 200), rng.integers(0, 40, 200)
        vals = rng.standard_normal(200)
        np.add.at(dense, (rows, cols), vals)
        ref = np.linalg.svd(dense, compute_uv=False)[0]
        for G in (EntryGradient(rows, cols, vals, (30, 40)), sp.coo_matrix((vals, (rows, cols)), (30, 40))):
            top = power_iteration_top_pair(G, tol=1e-8, max_iters=50000)
            assert abs(top.sigma - ref) / ref <= 1e-5

    def test_entry_gradient_products(self):
        G = EntryGradient([0, 1, 0], [2, 0, 2], [1.0, 2.0, 3.0], (2, 3))
        dense = G.toarray()
        np.testing.assert_array_equal(dense, [[0, 0, 4], [2, 0, 0]])
        v, w = np.array([1.0, 2.0, 3.0]), np.array([1.0, -1.0])
        np.testing.assert_allclose(G @ v, dense @ v)
        np.testing.assert_allclose(G.rmatvec(w), dense.T @ w)

    def test_warning_on_budget(self):
        G = np.random.default_rng(6).standard_normal((40, 40))
        with pytest.warns(ConvergenceWarning):
            top = power_iteration_top_pair(G, tol=1e-12, max_iters=3)
        assert not top.converged and top.iters == 3

    def test_zero_matrix(self):
        with pytest.raises(NumericError):
            power_iteration_top_pair(np.zeros((3, 3)))

    def test_bad_tol(self):
        with pytest.raises(ParameterError):
            power_iteration_top_pair(np.eye(2), tol=0.0)

    def test_seeded(self):
        G = np.random.default_rng(7).standard_normal((10, 12))
        a = power_iteration_top_pair(G, seed=3)
        b = power_iteration_top_pair(G, seed=3)
        assert a.sigma == b.sigma and np.array_equal(a.v, b.v)


class TestTraceLmo:
    def test_diagonal(self):
        atom = lmo_trace_ball(TraceNormBall(2, 2, 1.0), np.diag([2.0, 1.0]), tol=1e-10)
        np.testing.assert_allclose(atom.to_dense(), [-1, 0, 0, 0], atol=1e-4)
        assert np.sum(np.diag([2.0, 1.0]).ravel() * atom.to_dense()) == pytest.approx(-2.0, abs=1e-6)

    def test_single_entry(self):
        G = np.zeros((3, 4))
        G[0, 1] = 5.0
        atom = TraceNormBall(3, 4, 3.0).lmo(G)
        assert np.sum(G.ravel() * atom.to_dense()) == pytest.approx(-15.0, abs=1e-4)
        assert abs(atom.scale) == 3.0

    def test_random_against_jacobi(self):
        rng = np.random.default_rng(8)
        domain = TraceNormBall(20, 30, 7.0)
        for k in range(5):
            G = rng.standard_normal((20, 30))
            ref = -7.0 * jacobi_singular_values(G)[0]
            got = float(np.sum(G.ravel() * domain.lmo(G, seed=k).to_dense()))
            assert abs(got - ref) / abs(ref) <= 1e-4

    def test_zero_gradient(self):
        atom = TraceNormBall(2, 3, 2.0).lmo(np.zeros((2, 3)))
        np.testing.assert_array_equal(atom.to_dense(), [2, 0, 0, 0, 0, 0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            TraceNormBall(2, 3, 1.0).lmo(np.ones((3, 2)))

    def test_entry_gradient_inner(self):
        G = EntryGradient([0, 1], [1, 2], [5.0, -1.0], (2, 3))
        atom = TraceNormBall(2, 3, 1.0).lmo(G)
        assert G.inner(atom) == pytest.approx(np.sum(G.toarray().ravel() * atom.to_dense()))
        assert G.inner(atom) == pytest.approx(-5.0, abs=1e-4)


def _feasible_points(domain, rng, count):
    if isinstance(domain, Simplex):
        return rng.dirichlet(np.ones(domain.dim), count)
    if isinstance(domain, Ball):
        u = rng.standard_normal((count, domain.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return domain.radius * rng.random((count, 1)) ** (1 / domain.dim) * u
    from onlinefw.checks import dag_paths, independent_sets
    verts = dag_paths(domain) if isinstance(domain, FlowPolytope) else independent_sets(domain.n, domain.k)
    return rng.dirichlet(np.ones(len(verts)), count) @ verts


@pytest.mark.parametrize("domain", [Simplex(7), Ball(5, 2.0), random_flow_polytope(7, seed=2),
                                    UniformMatroid(8, 3)], ids=["simplex", "ball", "flow", "matroid"])
def test_lmo_beats_random_feasible_points(domain):
    rng = np.random.default_rng(9)
    pts = _feasible_points(domain, rng, 1000)
    assert all(domain.contains(p) for p in pts[:20])
    for _ in range(5):
        c = rng.standard_normal(domain.dim)
        v = domain.lmo(c).dense
        assert domain.contains(v)
        assert np.all(c @ v <= pts @ c + 1e-12)


def test_trace_lmo_beats_random_feasible_points():
    rng = np.random.default_rng(10)
    domain = TraceNormBall(6, 5, 2.0)
    G = rng.standard_normal((6, 5))
    val = float(np.sum(G.ravel() * domain.lmo(G).to_dense()))
    for _ in range(1000):
        X = rng.standard_normal((6, 5))
        X *= 2.0 * rng.random() / np.linalg.svd(X, compute_uv=False).sum()
        assert val <= np.sum(G * X) + 1e-9


class TestProjections:
    def test_simplex_examples(self):
        np.testing.assert_allclose(project_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3)
        np.testing.assert_allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_simplex_matches_kkt(self, seed):
        y = np.random.default_rng(seed).normal(0, 1.5, 6)
        x = project_simplex(y)
        assert x.min() >= 0 and abs(x.sum() - 1) <= 1e-9
        np.testing.assert_allclose(x, simplex_projection_kkt(y), atol=1e-12)

    def test_simplex_nan(self):
        with pytest.raises(NumericError):
            project_simplex([0.1, math.nan])

    def test_ball_examples(self):
        np.testing.assert_array_equal(project_ball([3.0, 4.0], 5.0), [3, 4])
        np.testing.assert_allclose(project_ball([3.0, 4.0], 1.0), [0.6, 0.8])

    def test_ball_radial_grid(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            y = rng.normal(0, 3, 4)
            x = project_ball(y, 1.0)
            assert np.linalg.norm(x) <= 1 + 1e-12
            grid = np.linspace(0, 1, 10001)[:, None] * (y / np.linalg.norm(y))
            best = np.linalg.norm(grid - y, axis=1).min()
            assert np.linalg.norm(x - y) <= best + 1e-12

    def test_trace_examples(self):
        Y = np.diag([3.0, 1.0])
        np.testing.assert_array_equal(project_trace_ball(Y, 4.0), Y)
        np.testing.assert_allclose(project_trace_ball(Y, 2.0), np.diag([2.0, 0.0]), atol=1e-12)

    def test_trace_local_optimality(self):
        rng = np.random.default_rng(12)
        Y = rng.standard_normal((6, 5))
        P = project_trace_ball(Y, 1.0)
        assert np.linalg.svd(P, compute_uv=False).sum() <= 1 + 1e-8
        d0 = np.linalg.norm(Y - P)
        for _ in range(500):
            Z = P + 1e-2 * rng.standard_normal((6, 5))
            nuc = np.linalg.svd(Z, compute_uv=False).sum()
            if nuc > 1.0:
                Z /= nuc
            assert np.linalg.norm(Y - Z) >= d0 - 1e-12

    @pytest.mark.parametrize("domain", [Simplex(5), Ball(5, 1.5)], ids=["simplex", "ball"])
    def test_idempotent_and_firm(self, domain):
        rng = np.random.default_rng(13)
        for _ in range(50):
            y = rng.normal(0, 2, 5)
            p = domain.project(y)
            np.testing.assert_allclose(domain.project(p), p, atol=1e-10)
            z = _feasible_points(domain, rng, 1)[0]
            assert np.linalg.norm(p - y) <= np.linalg.norm(z - y) + 1e-9

    def test_trace_idempotent(self):
        Y = np.random.default_rng(14).standard_normal((4, 6))
        P = project_trace_ball(Y, 1.5)
        np.testing.assert_allclose(project_trace_ball(P, 1.5), P, atol=1e-10)


class TestDomains:
    def test_diameters(self):
        assert Simplex(4).diameter == pytest.approx(math.sqrt(2))
        assert Ball(3, 2.5).diameter == 5.0
        assert TraceNormBall(2, 2, 3.0).diameter == 6.0
        assert UniformMatroid(5, 2).diameter == pytest.approx(2.0)

    def test_projection_capability(self):
        assert Simplex(3).can_project and Ball(3).can_project and TraceNormBall(2, 2, 1.0).can_project
        assert not UniformMatroid(3, 1).can_project and not TRIANGLE.can_project

    @pytest.mark.parametrize("make", [lambda: Simplex(0), lambda: Ball(2, -1.0),
                                      lambda: TraceNormBall(2, 2, 0.0), lambda: FlowPolytope(2, (), 0, 1)])
    def test_bad_parameters(self, make):
        with pytest.raises(ParameterError):
            make()

    def test_lmo_is_boundary(self):
        rng = np.random.default_rng(15)
        c = rng.standard_normal(4)
        assert np.linalg.norm(Ball(4, 2.0).lmo(c).dense) == pytest.approx(2.0)
        atom = TraceNormBall(3, 4, 2.0).lmo(rng.standard_normal((3, 4)))
        assert np.linalg.svd(atom.to_dense().reshape(3, 4), compute_uv=False).sum() == pytest.approx(2.0)


def test_no_warning_on_easy_matrix():
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        power_iteration_top_pair(np.diag([3.0, 1.0, 0.5]))
