from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpcr.game import GameError, cop_successor, rob_successor, sample_play, validate
from gpcr.games import (
    I_COP,
    I_ROB,
    JAIL,
    CaptureProfile,
    SurvivalProfile,
    build_classic,
    build_drunk,
    build_drunk_defending,
    build_fast_defending,
    build_markov_chain,
    build_random_robber,
    build_temporal,
    check_robber_kernel,
    path_survival,
    solve_fast_defending_optimized,
    survival_matrix,
    uniform_kernel,
)
from gpcr.graph import Graph, bfs_distances, complete_graph, cycle_graph, empty_graph, iter_connected_graphs, path_graph
from gpcr.oracle import expectimax_value
from gpcr.solver import apply_operator, rob_action_values, value_iterate

from .instances import SMALL_GRAPHS, suite_instances

ATLAS5 = list(iter_connected_graphs(5)) + [empty_graph(2), empty_graph(3)]


def placed(g):
    return [(c, r) for c in g.vertices for r in g.vertices]


@pytest.mark.parametrize("name,spec", suite_instances()[:40], ids=lambda x: x if isinstance(x, str) else "")
def test_builders_produce_valid_games(name, spec):
    assert validate(spec) == []


def test_classic_shape():
    g = path_graph(3)
    spec = build_classic(g)
    assert spec.state_count == 4 * 4
    assert spec.states[spec.initial].key == (I_COP, I_ROB, None)
    assert {spec.states[s].key[:2] for s in spec.finals} == {(v, v) for v in g.vertices}
    assert spec.is_deterministic()
    assert spec.cop_actions[spec.initial] == (0, 1, 2)
    assert spec.cop_actions[spec.state_id(0, 2)] == (0, 1)
    assert spec.rob_actions[spec.state_id(1, 0)] == (0, 1)


def test_drunk_kernel_is_uniform():
    g = star(5)
    spec = build_drunk(g)
    d = rob_successor(spec, spec.state_id(2, 0), 5)
    assert dict(d.exact_items()) == {spec.state_id(2, x): Fraction(1, 5) for x in range(5)}
    leaf = rob_successor(spec, spec.state_id(2, 3), 5)
    assert dict(leaf.exact_items()) == {spec.state_id(2, 0): Fraction(1, 2), spec.state_id(2, 3): Fraction(1, 2)}


def star(n):
    return Graph(n, frozenset((0, i) for i in range(1, n)))


def test_drunk_examples():
    k3 = build_drunk(complete_graph(3))
    w1 = value_iterate(k3, 1).final
    assert all(w1[k3.state_id(c, r)] == 1.0 for c, r in placed(complete_graph(3)))
    c4 = build_drunk(cycle_graph(4))
    assert value_iterate(c4, 1).final[c4.state_id(0, 2)] == pytest.approx(1 / 3, abs=1e-15)


def test_defending_kernel_on_triangle():
    spec = build_drunk_defending(complete_graph(3), Fraction(1, 4))
    d = dict(rob_successor(spec, spec.state_id(0, 0), 3).exact_items())
    jail = spec.state_id(JAIL, JAIL)
    assert d == {jail: Fraction(1, 4), **{spec.state_id(0, x): Fraction(1, 4) for x in range(3)}}
    assert spec.finals == frozenset({jail})


@pytest.mark.parametrize("g", ATLAS5, ids=lambda g: f"n{g.vertex_count}e{len(g.edges)}")
def test_defending_with_sure_capture_matches_drunk(g):
    drunk = build_drunk(g)
    dfd = build_drunk_defending(g, 1)
    # the drunk game ends on the meeting itself, the defending one on the following robber move;
    # starting the defending recursion with the meeting states at 1 aligns the two
    w = np.zeros(dfd.state_count)
    w[sorted(dfd.finals)] = 1.0
    for v in g.vertices:
        w[dfd.state_id(v, v)] = 1.0
    table = value_iterate(drunk, 4, keep_all=True)
    keys = [(c, r) for c in [I_COP, *g.vertices] for r in [I_ROB, *g.vertices]]
    for k in range(5):
        for c, r in keys:
            assert w[dfd.state_id(c, r)] == pytest.approx(table.values[k][drunk.state_id(c, r)], abs=1e-12)
        w = apply_operator(dfd, w)
    # unaligned, the defending game lags by at most one turn
    plain = value_iterate(dfd, 5, keep_all=True)
    for k in range(1, 5):
        for c, r in keys:
            assert plain.values[k][dfd.state_id(c, r)] <= table.values[k][drunk.state_id(c, r)] + 1e-12
            assert plain.values[k + 1][dfd.state_id(c, r)] >= table.values[k][drunk.state_id(c, r)] - 1e-12


def test_defending_without_capture_never_wins():
    spec = build_drunk_defending(cycle_graph(4), 0)
    assert value_iterate(spec, 10).final[spec.initial] == 0.0


def test_capture_profile_errors():
    with pytest.raises(GameError):
        CaptureProfile.of(path_graph(2), Fraction(3, 2))
    with pytest.raises(GameError):
        CaptureProfile.of(path_graph(2), [0.5])
    assert CaptureProfile.of(path_graph(2), {0: 0.5, 1: 1})(0) == Fraction(1, 2)


# ----------------------------------------------------------------------------
# Random robbers


def test_uniform_kernel_reproduces_drunk():
    for g in SMALL_GRAPHS.values():
        a = value_iterate(build_drunk(g), 4, keep_all=True).values
        b = value_iterate(build_random_robber(g, uniform_kernel(g)), 4, keep_all=True).values
        assert np.array_equal(a, b)


@pytest.mark.parametrize("g", [path_graph(4), cycle_graph(5), star(4), empty_graph(2)], ids=["P4", "C5", "star4", "E2"])
def test_frozen_robber_is_caught_at_distance(g):
    spec = build_random_robber(g, {r: {r: 1} for r in g.vertices})
    table = value_iterate(spec, 5, keep_all=True)
    for c in g.vertices:
        dist = bfs_distances(g, c)
        for r in g.vertices:
            for n in range(6):
                expected = 1.0 if r in dist and dist[r] <= n else 0.0
                assert table.values[n][spec.state_id(c, r)] == expected


def test_kernel_errors():
    g = path_graph(3)
    with pytest.raises(GameError):
        check_robber_kernel(g, {0: {2: 1}, 1: {1: 1}, 2: {2: 1}})
    with pytest.raises(GameError):
        check_robber_kernel(g, {0: {0: 0.5}, 1: {1: 1}, 2: {2: 1}})
    with pytest.raises(GameError):
        check_robber_kernel(g, {0: {0: 1}})


@st.composite
def graph_and_kernel(draw):
    g = draw(st.sampled_from(ATLAS5))
    phi = {}
    for r in g.vertices:
        nb = list(g.closed_neighborhood(r))
        support = draw(st.lists(st.sampled_from(nb), min_size=1, unique=True))
        weights = [draw(st.integers(1, 5)) for _ in support]
        phi[r] = {x: Fraction(wt, sum(weights)) for x, wt in zip(support, weights)}
    return g, phi


@given(graph_and_kernel())
@settings(max_examples=60)
def test_random_robbers_are_easier_to_catch(gk):
    g, phi = gk
    rnd = value_iterate(build_random_robber(g, phi), 4, keep_all=True).values
    adv = value_iterate(build_classic(g), 4, keep_all=True).values
    a, b = build_random_robber(g, phi), build_classic(g)
    for n in range(5):
        for c, r in placed(g):
            assert rnd[n][a.state_id(c, r)] >= adv[n][b.state_id(c, r)] - 1e-12


# ----------------------------------------------------------------------------
# Fast defending robber


def test_fast_defending_kernels():
    g = path_graph(3)
    spec = build_fast_defending(g, Fraction(1, 2))
    s = spec.state_id(1, 0)
    jail = spec.state_id(JAIL, JAIL)
    labels = {spec.rob_action_labels[a]: a for a in spec.rob_actions[s]}
    assert set(labels) == {"path 0", "path 0-1", "path 0-1-2"}
    assert dict(rob_successor(spec, s, labels["path 0"]).exact_items()) == {s: 1}
    assert dict(rob_successor(spec, s, labels["path 0-1"]).exact_items()) == {spec.state_id(1, 1): Fraction(1, 2), jail: Fraction(1, 2)}
    assert dict(rob_successor(spec, s, labels["path 0-1-2"]).exact_items()) == {spec.state_id(1, 2): Fraction(1, 4), jail: Fraction(3, 4)}
    # cop on 0 watches only the edge 0-1 and the loop at 0
    far = spec.state_id(0, 2)
    step = {spec.rob_action_labels[a]: a for a in spec.rob_actions[far]}["path 2-1"]
    assert dict(rob_successor(spec, far, step).exact_items()) == {spec.state_id(0, 1): 1}
    assert spec.finals == frozenset({jail})
    assert spec.display(jail) == "(j*,∅,j*)"


def test_fast_defending_robber_stays_put_on_the_path():
    g = path_graph(3)
    spec = build_fast_defending(g, Fraction(1, 2))
    s = spec.state_id(1, 0)
    for n in range(4):
        table = value_iterate(spec, n + 1, keep_all=True)
        vals = rob_action_values(spec, s, table.values[n])
        best = min(vals, key=lambda a: (vals[a], a))
        assert spec.rob_action_labels[best] == "path 0"
        assert vals[best] == 0.0
        assert expectimax_value(spec, n) == 0


def test_fast_defending_loop_mode():
    spec = build_fast_defending(path_graph(3), Fraction(1, 2), stay_mode="loop")
    table = value_iterate(spec, 3, keep_all=True)
    for n in range(4):
        assert table.values[n][spec.initial] == float(expectimax_value(spec, n))
    assert [table.values[n][spec.initial] for n in range(4)] == [0.0, 0.0, 0.5, 0.5]


def test_path_survival_and_zones():
    g = path_graph(4)
    q = SurvivalProfile(Fraction(1, 3))
    assert path_survival(g, q, 0, (2, 3)) == 1
    assert path_survival(g, q, 1, (0, 1, 2, 3)) == Fraction(1, 9)
    assert path_survival(g, q, 1, (1,), "loop") == Fraction(1, 3)
    assert path_survival(g, q, 1, (1,), "free") == 1
    wide = SurvivalProfile(Fraction(1, 3), zone="radius2")
    assert (2, 3) in wide.watch_zone(g, 1)
    assert (2, 3) not in q.watch_zone(g, 1)
    with pytest.raises(GameError):
        SurvivalProfile(2)(g, 0, (0, 1))
    with pytest.raises(GameError):
        SurvivalProfile(0.5, zone="disk").watch_zone(g, 0)


def test_survival_matrix_empty_path():
    Q = survival_matrix(cycle_graph(4), SurvivalProfile(Fraction(1, 2)))
    assert np.all(np.diagonal(Q, axis1=1, axis2=2) == 1.0)
    Ql = survival_matrix(cycle_graph(4), SurvivalProfile(Fraction(1, 2)), "loop")
    assert Ql[0, 0, 0] == 0.5 and Ql[0, 2, 2] == 1.0


@pytest.mark.parametrize("mode", ["free", "loop"])
@pytest.mark.parametrize("name", ["P3", "C4", "C5", "star4"])
def test_optimized_matches_naive(name, mode):
    g = SMALL_GRAPHS[name]
    q = SurvivalProfile(lambda c, e: Fraction(1, 4) if (e[0] + e[1] + c) % 2 else Fraction(1, 2))
    fast = solve_fast_defending_optimized(g, q, 4, mode)
    spec = build_fast_defending(g, q, stay_mode=mode)
    table = value_iterate(spec, 4, keep_all=True)
    for k in range(5):
        assert fast.initial[k] == pytest.approx(table.values[k][spec.initial], abs=1e-9)
        for c, r in placed(g):
            assert fast.values[k, c, r] == pytest.approx(table.values[k][spec.state_id(c, r)], abs=1e-9)


def test_sure_survival_is_the_deterministic_fast_robber():
    g = cycle_graph(4)
    fast = solve_fast_defending_optimized(g, 1, 4)
    assert np.all(fast.survival == 1.0)
    w = np.zeros((4, 4))
    for _ in range(4):
        w = np.array([[max(w[cp].min() for cp in g.closed_neighborhood(c)) for r in range(4)] for c in range(4)])
    assert np.array_equal(fast.values[4], w)


# ----------------------------------------------------------------------------
# Markov chains


def test_markov_chain_marginals_match_matrix_products():
    M0 = [[Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 4), Fraction(3, 4)]]
    M1 = [[Fraction(1, 2), Fraction(1, 2)], [1, 0]]
    init = [Fraction(1, 5), Fraction(4, 5)]
    spec = build_markov_chain(init, [M0, M1])
    assert not spec.finals
    assert value_iterate(spec, 6).final[spec.initial] == 0.0
    dist = {spec.initial: Fraction(1)}
    expected = np.array(init, dtype=object)
    for j in range(4):
        nxt = Counter()
        for s, m in dist.items():
            for t, p in cop_successor(spec, s, 0).exact_items():
                nxt[t] += m * p
        dist = dict(nxt)
        for e in range(2):
            assert dist.get(spec.state_id(e, "-", min(j, 2)), 0) == expected[e]
        expected = expected @ np.array([M0, M1, M1, M1][j], dtype=object)
    # sampled plays agree with the exact step-2 marginal
    counts = Counter()
    plays = 4000
    for seed in range(plays):
        play = sample_play(spec, lambda s, k: 0, lambda s, k: 0, 3, rng_seed=seed)
        counts[spec.states[play.states[-1]].cop] += 1
    exact = np.array(init, dtype=object) @ np.array(M0, dtype=object) @ np.array(M1, dtype=object)
    for e in range(2):
        p = float(exact[e])
        assert abs(counts[e] / plays - p) <= 4 * np.sqrt(p * (1 - p) / plays)


def test_homogeneous_chain_follows_matrix_powers():
    M = np.array([[Fraction(1, 2), Fraction(1, 2)], [Fraction(1, 3), Fraction(2, 3)]], dtype=object)
    spec = build_markov_chain({0: 1}, [M.tolist()] * 4)
    dist = {spec.initial: Fraction(1)}
    row = np.array([Fraction(1), Fraction(0)], dtype=object)
    for j in range(4):
        nxt = Counter()
        for s, m in dist.items():
            for t, p in cop_successor(spec, s, 0).exact_items():
                nxt[t] += m * p
        dist = dict(nxt)
        assert [dist.get(spec.state_id(e, "-", j), 0) for e in range(2)] == list(row)
        row = row @ M


def test_markov_chain_errors():
    with pytest.raises(GameError):
        build_markov_chain([1, 0], [[[0.5, 0.4], [0, 1]]])
    with pytest.raises(GameError):
        build_markov_chain([1, 0], [])
    with pytest.raises(GameError):
        build_markov_chain([0.5, 0.4], [[[1, 0], [0, 1]]])


# ----------------------------------------------------------------------------
# Temporal graphs


@pytest.mark.parametrize("variant,builder", [("classic", build_classic), ("drunk", build_drunk)])
@pytest.mark.parametrize("name", ["P3", "C4", "star4"])
def test_constant_sequence_is_static(name, variant, builder):
    g = SMALL_GRAPHS[name]
    temporal = build_temporal([g, g, g], variant)
    static = builder(g)
    a = value_iterate(temporal, 6, keep_all=True).values
    b = value_iterate(static, 6, keep_all=True).values
    for t in range(3):
        for c in [I_COP, *g.vertices]:
            for r in [I_ROB, *g.vertices]:
                assert np.allclose(a[:, temporal.state_id(c, r, t)], b[:, static.state_id(c, r)], atol=1e-12)


def test_removing_an_edge_lets_one_cop_win():
    spec = build_temporal([cycle_graph(4), path_graph(4)])
    w = value_iterate(spec, 8, keep_all=True).values[:, spec.initial]
    assert w[8] == 1.0
    assert value_iterate(build_classic(cycle_graph(4)), 8).final[0] == 0.0


def test_graph_vanishing_after_the_first_move():
    spec = build_temporal([path_graph(3), empty_graph(3)], "drunk")
    table = value_iterate(spec, 12, keep_all=True)
    from gpcr.game import reachable_states

    live = sorted(reachable_states(spec))
    assert np.allclose(table.values[1][live], table.values[12][live], atol=1e-15)
    s = spec.state_id(1, 0, 1)
    assert table.values[1][s] == float(expectimax_value(spec, 1, start=s))


def test_time_advances_on_every_move():
    spec = build_temporal([path_graph(3), path_graph(3), empty_graph(3)])
    d = cop_successor(spec, spec.initial, 1)
    assert spec.states[d.support[0]].key == (1, I_ROB, 1)
    d = rob_successor(spec, d.support[0], 0)
    assert spec.states[d.support[0]].key == (1, 0, 2)


def test_temporal_errors():
    with pytest.raises(GameError):
        build_temporal([])
    with pytest.raises(GameError):
        build_temporal([path_graph(2), path_graph(3)])
    with pytest.raises(GameError):
        build_temporal([path_graph(2)], "fast-defending")


def test_state_budget():
    with pytest.raises(GameError, match="state budget"):
        build_classic(path_graph(10), cops=3, state_budget=500)
