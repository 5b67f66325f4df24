"""Abstract graph construction and order tagging on the bundled model.

The progress graph (rank) and the blocking graph (nlock) are pinned against
frozen tables; a brute-force sweep with the native mirror double-checks the
worklist construction on a small instance.
"""

import itertools
from collections import Counter

import pytest

from wfgraph.absgraph import (
    Graph,
    GraphError,
    NotTotal,
    TaggedGraph,
    chk_ord_arc,
    false_inv_nodes,
    graph_from_json,
    graph_to_dot,
    graph_to_json,
    lex_le_expr,
    lex_lt_expr,
    map_graph,
    reach_graph,
    rel_graph,
    tag_graph,
)
from wfgraph.bakery import BakeSh, BakeTr, bake_init, bake_tr_next, bakery_model
from wfgraph.model import (
    BoolV,
    NatSort,
    NatV,
    TupleE,
    TupleV,
    Var,
    eval_expr,
    value_text,
)


@pytest.fixture(scope="module")
def model():
    return bakery_model()


@pytest.fixture(scope="module")
def rank_tg(model):
    g = map_graph(model, "rank")
    return tag_graph(model, "rank", g)


@pytest.fixture(scope="module")
def nlock_tg(model):
    g = map_graph(model, "nlock")
    return tag_graph(model, "nlock", g)


# (loc, done, loop=0, runs=0) of each node, in canonical node order; the
# :inv field is True everywhere so it is left out of the key
RANK_NODES = [
    (0, False, True, False),
    (1, False, True, False),
    (2, False, True, False),
    (3, False, False, False),
    (4, False, False, False),
    (5, False, False, False),
    (5, False, True, False),
    (6, False, True, False),
    (7, False, True, False),
    (8, False, False, False),
    (9, False, False, False),
    (10, False, False, False),
    (11, False, False, False),
    (12, False, False, False),
    (12, False, True, False),
    (13, False, True, False),
    (14, False, True, False),
    (15, False, True, False),
    (15, False, True, True),
    (16, False, True, True),
    (17, True, True, True),
]

# arc -> (runs tag, loop tag)
RANK_TAGS = {
    (0, 1): ("non-inc", "non-inc"),
    (1, 2): ("non-inc", "non-inc"),
    (2, 3): ("non-inc", "may-inc"),
    (3, 4): ("non-inc", "non-inc"),
    (4, 5): ("non-inc", "strict-dec"),
    (4, 6): ("non-inc", "strict-dec"),
    (5, 3): ("non-inc", "non-inc"),
    (6, 7): ("non-inc", "non-inc"),
    (7, 8): ("non-inc", "non-inc"),
    (8, 9): ("non-inc", "may-inc"),
    (9, 10): ("non-inc", "non-inc"),
    (10, 11): ("non-inc", "non-inc"),
    (11, 12): ("non-inc", "non-inc"),
    (12, 13): ("non-inc", "strict-dec"),
    (12, 14): ("non-inc", "strict-dec"),
    (13, 9): ("non-inc", "non-inc"),
    (14, 15): ("non-inc", "non-inc"),
    (15, 16): ("non-inc", "non-inc"),
    (16, 17): ("strict-dec", "non-inc"),
    (16, 18): ("strict-dec", "non-inc"),
    (17, 0): ("non-inc", "non-inc"),
    (18, 19): ("non-inc", "non-inc"),
    (19, 20): ("non-inc", "non-inc"),
}


def rank_key(n: TupleV):
    return (n.get("loc").val, n.get("done").val, n.get("loop=0").val,
            n.get("runs=0").val)


def test_rank_graph_frozen(rank_tg):
    assert len(rank_tg.nodes) == 21
    assert [rank_key(n) for n in rank_tg.nodes] == RANK_NODES
    assert all(n.get("inv") == BoolV(True) for n in rank_tg.nodes)
    assert rank_tg.arcs == tuple(sorted(RANK_TAGS))
    assert rank_tg.measures == ("runs", "loop")
    assert rank_tg.widths == {"runs": 1, "loop": 1}
    for (i, j), (truns, tloop) in RANK_TAGS.items():
        assert rank_tg.tags[(i, j, "runs")] == truns, (i, j)
        assert rank_tg.tags[(i, j, "loop")] == tloop, (i, j)


def test_nlock_graph_facts(nlock_tg):
    # domain: every loc (choosing/pos-valid pinned by phase-flags-ok) split
    # by whether pos is zero
    assert len(nlock_tg.nodes) == 64
    assert len(nlock_tg.arcs) == 62
    assert nlock_tg.measures == ("pos", "ndx")

    def loc(i):
        return nlock_tg.nodes[i].get("loc").val

    srcs = Counter(loc(i) for (i, _) in nlock_tg.arcs)
    assert dict(srcs) == {3: 16, 8: 14, 9: 16, 10: 16}

    # arcs out of loc 3 require pos = 0 at the source, so the other loc-3
    # node is a non-source
    for i, n in enumerate(nlock_tg.nodes):
        if loc(i) == 3:
            has_out = any(s == i for (s, _) in nlock_tg.arcs)
            assert has_out == (n.get("pos=0") == BoolV(True))

    # destination locs follow the blocking predicate's guards
    def dst_locs(src_loc):
        return sorted({loc(j) for (i, j) in nlock_tg.arcs if loc(i) == src_loc})

    assert dst_locs(3) == [6, 7, 8, 9, 10, 11, 12, 13]   # pos-valid span
    assert dst_locs(8) == [1, 2, 3, 4, 5, 6, 7]          # choosing span
    assert dst_locs(9) == [6, 7, 8, 9, 10, 11, 12, 13]
    assert dst_locs(10) == [6, 7, 8, 9, 10, 11, 12, 13]

    profile = Counter()
    for (i, j) in nlock_tg.arcs:
        tags = tuple(nlock_tg.tags[(i, j, m)] for m in nlock_tg.measures)
        profile[(loc(i), tags)] += 1
    assert dict(profile) == {
        (3, ("may-inc", "may-inc")): 8,
        (3, ("non-inc", "may-inc")): 8,
        (8, ("may-inc", "may-inc")): 14,
        (9, ("strict-dec", "may-inc")): 16,
        (10, ("non-inc", "strict-dec")): 16,
    }


def test_reach_graph_matches_native_sweep():
    # brute force over the whole concrete domain with the native mirror,
    # then worklist closure from the initial node; must equal the tool's
    # graph exactly
    n, r, w = 1, 1, 2
    g = map_graph(bakery_model(n=n, r=r, w=w), "rank")

    def native_node(a):
        return (a.loc, a.done, a.loop == 0, a.runs == 0, True)

    arcs_by_src = {}
    bools = (False, True)
    for loc, ch, temp, pos, pv, loop, runs, ndx in itertools.product(
            range(32), bools, range(1 << w), range(1 << w), bools,
            range(2), range(2), range(2)):
        a = BakeTr(loc, ch, temp, pos, pv, loop, runs, False, ndx)
        u = native_node(a)
        for mx in range(1 << w):
            b = bake_tr_next(a, BakeSh(mx), n, w)
            arcs_by_src.setdefault(u, set()).add(native_node(b))

    start = native_node(bake_init(n, r).trs[0])
    reached = {start}
    work = [start]
    arcs = set()
    while work:
        u = work.pop()
        for v in arcs_by_src.get(u, ()):
            arcs.add((u, v))
            if v not in reached:
                reached.add(v)
                work.append(v)

    def from_value(nv):
        return (nv.get("loc").val, nv.get("done").val, nv.get("loop=0").val,
                nv.get("runs=0").val, nv.get("inv").val)

    assert {from_value(x) for x in g.nodes} == reached
    assert {(from_value(g.nodes[i]), from_value(g.nodes[j]))
            for (i, j) in g.arcs} == arcs


def test_backends_agree_on_rank_graph():
    m = bakery_model(w=2)
    ge = map_graph(m, "rank", backend="exhaustive")
    gs = map_graph(m, "rank", backend="sat")
    assert ge == gs
    assert tag_graph(m, "rank", ge, backend="exhaustive") \
        == tag_graph(m, "rank", gs, backend="sat")


def test_graph_json_roundtrip(rank_tg):
    doc = graph_to_json(rank_tg)
    assert doc["format"] == "wfgraph-graph-v1"
    assert doc["node_texts"][0] == value_text(rank_tg.nodes[0])
    assert graph_from_json(doc) == rank_tg

    plain = Graph(rank_tg.nodes, rank_tg.arcs)
    assert graph_from_json(graph_to_json(plain)) == plain

    with pytest.raises(GraphError):
        graph_from_json({"format": "something-else"})
    bad = graph_to_json(rank_tg)
    bad["arc_tags"][0]["runs"] = "sideways"
    with pytest.raises(GraphError):
        graph_from_json(bad)


def test_not_total_budgets(model):
    with pytest.raises(NotTotal) as e:
        map_graph(model, "rank", num=1)
    assert e.value.what == "init"
    with pytest.raises(NotTotal) as e:
        map_graph(model, "rank", num=2)
    assert e.value.what == "step"
    assert e.value.node is not None
    with pytest.raises(NotTotal) as e:
        map_graph(model, "nlock", num=10)
    assert e.value.what == "domain"


def _pair(x, y):
    return TupleE(((None, x), (None, y)))


def test_lex_exprs_match_tuple_order():
    vs = {v: NatSort(2) for v in ("x", "y", "u", "v")}
    lt = lex_lt_expr(_pair(Var("x"), Var("y")), _pair(Var("u"), Var("v")))
    le = lex_le_expr(_pair(Var("x"), Var("y")), _pair(Var("u"), Var("v")))
    for xs in itertools.product(range(4), repeat=4):
        env = {name: NatV(val, 2) for name, val in zip(("x", "y", "u", "v"), xs)}
        a, b = (xs[0], xs[1]), (xs[2], xs[3])
        assert eval_expr(lt, env) == BoolV(a < b), xs
        assert eval_expr(le, env) == BoolV(a <= b), xs


def test_lex_expr_edges():
    empty = TupleE(())
    assert eval_expr(lex_lt_expr(empty, empty), {}) == BoolV(False)
    assert eval_expr(lex_le_expr(empty, empty), {}) == BoolV(True)
    with pytest.raises(GraphError):
        lex_lt_expr(_pair(Var("x"), Var("y")), TupleE(((None, Var("u")),)))
    with pytest.raises(GraphError):
        lex_le_expr(TupleE(((None, Var("x")),)), _pair(Var("u"), Var("v")))
    with pytest.raises(GraphError):
        lex_lt_expr(Var("x"), Var("y"))  # not tuple expressions


def test_chk_ord_arc(rank_tg):
    u, v = rank_tg.nodes[0], rank_tg.nodes[1]
    assert chk_ord_arc(rank_tg, u, v, "runs") == "non-inc"
    assert chk_ord_arc(rank_tg, rank_tg.nodes[4], rank_tg.nodes[5],
                       "loop") == "strict-dec"
    with pytest.raises(GraphError):
        chk_ord_arc(rank_tg, v, u, "runs")  # no such arc
    with pytest.raises(GraphError):
        chk_ord_arc(rank_tg, u, v, "fuel")  # no such measure


def test_false_inv_nodes(rank_tg):
    assert false_inv_nodes(rank_tg) == []
    bad = TupleV((("loc", NatV(3, 5)), ("inv", BoolV(False))))
    ok = TupleV((("loc", NatV(4, 5)), ("inv", BoolV(True))))
    g = Graph((bad, ok), ((0, 1),))
    assert false_inv_nodes(g) == [bad]


def test_graph_helpers(rank_tg):
    first = rank_tg.nodes[0]
    assert rank_tg.node_index(first) == 0
    assert rank_tg.succ_indices(0) == [1]
    assert rank_tg.nexts(first) == [rank_tg.nodes[1]]
    with pytest.raises(GraphError):
        rank_tg.node_index(BoolV(True))


def test_map_kind_dispatch(model):
    with pytest.raises(GraphError):
        reach_graph(model, "nlock")
    with pytest.raises(GraphError):
        rel_graph(model, "rank")


def test_graph_to_dot(rank_tg):
    dot = graph_to_dot(rank_tg, title="rank")
    assert dot.startswith('digraph "rank" {')
    assert 'n0 [label="((:loc 0)' in dot
    assert 'runs:non-inc' in dot and 'loop:strict-dec' in dot
    assert dot.rstrip().endswith("}")
    plain = graph_to_dot(Graph(rank_tg.nodes, rank_tg.arcs))
    assert "  n0 -> n1;" in plain.splitlines()
