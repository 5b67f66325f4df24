"""Value enumeration: the exhaustive and SAT routes must be observationally
identical, including totality verdicts and solve-call counts."""

import os
import random

import pytest

from _gen import rand_expr, rand_sort, rand_var_sorts
from wfgraph.enumeration import BACKENDS, EnumResult, compute_finite_values
from wfgraph.model import (
    BOOL,
    And,
    BoolV,
    Const,
    Eq,
    Lt,
    NatSort,
    NatV,
    Not,
    Var,
    sort_card,
)

HAVE_IPASIR = bool(os.environ.get("WFG_IPASIR_LIB"))


def _domain(var_sorts) -> int:
    total = 1
    for s in var_sorts.values():
        total *= sort_card(s)
    return total


def _compare(var_sorts, hyp, trm, num):
    ref = compute_finite_values(var_sorts, hyp, trm, num, "exhaustive")
    got = compute_finite_values(var_sorts, hyp, trm, num, "sat")
    assert got == ref, (hyp, trm)
    return ref


def test_backends_agree_on_random_queries():
    """Acceptance: 200 randomized queries, domains up to 2^16, identical
    EnumResults from both backends."""
    rng = random.Random(424242)
    agreed = 0
    for _ in range(160):
        var_sorts = rand_var_sorts(rng, max_vars=3, max_width=3)
        hyp = rand_expr(rng, var_sorts, BOOL, 3)
        trm = rand_expr(rng, var_sorts, rand_sort(rng), 3)
        _compare(var_sorts, hyp, trm, _domain(var_sorts) + 1)
        agreed += 1
    # wide domains, narrow terms: totality must still be provable
    for _ in range(40):
        var_sorts = {"x": NatSort(8), "y": NatSort(8)}
        assert _domain(var_sorts) == 1 << 16
        hyp = rand_expr(rng, var_sorts, BOOL, 3)
        trm = rand_expr(rng, var_sorts, NatSort(rng.randint(1, 3)), 2)
        res = _compare(var_sorts, hyp, trm, 65537)
        assert res.is_total
        agreed += 1
    assert agreed == 200


def test_cutoff_semantics():
    vs = {"x": NatSort(4)}
    top = Const(BoolV(True))
    for backend in ("exhaustive", "sat"):
        res = compute_finite_values(vs, top, Var("x"), 5, backend)
        assert len(res.values) == 5
        assert not res.is_total
        assert res.solve_calls == 5
        # budget exactly equal to the value count is not proof of totality
        res = compute_finite_values(vs, top, Var("x"), 16, backend)
        assert len(res.values) == 16
        assert not res.is_total
        assert res.solve_calls == 16
        res = compute_finite_values(vs, top, Var("x"), 17, backend)
        assert res.is_total
        assert res.solve_calls == 17


def test_zero_budget():
    vs = {"x": NatSort(2)}
    for backend in ("exhaustive", "sat"):
        res = compute_finite_values(vs, Const(BoolV(True)), Var("x"), 0,
                                    backend)
        assert res == EnumResult((), False, 0)


def test_unsat_hypothesis_is_total_in_one_call():
    vs = {"x": NatSort(3)}
    hyp = And((Lt(Var("x"), Const(NatV(2, 3))),
               Not(Lt(Var("x"), Const(NatV(4, 3))))))
    for backend in ("exhaustive", "sat"):
        res = compute_finite_values(vs, hyp, Var("x"), 10, backend)
        assert res.values == ()
        assert res.is_total
        assert res.solve_calls == 1


def test_values_are_canonically_sorted_and_distinct():
    vs = {"x": NatSort(3), "b": BOOL}
    trm = Var("x")
    for backend in ("exhaustive", "sat"):
        res = compute_finite_values(vs, Const(BoolV(True)), trm, 100, backend)
        vals = [v.val for v in res.values]
        assert vals == sorted(set(vals)) == list(range(8))


def test_solve_calls_count_blocking_probes():
    # n distinct values cost n SAT calls plus one final UNSAT probe
    vs = {"x": NatSort(2)}
    res = compute_finite_values(vs, Const(BoolV(True)),
                                Eq(Var("x"), Var("x")), 10, "sat")
    assert res.values == (BoolV(True),)
    assert res.is_total
    assert res.solve_calls == 2


def test_dump_cnf(tmp_path):
    path = tmp_path / "query.cnf"
    vs = {"x": NatSort(2)}
    compute_finite_values(vs, Const(BoolV(True)), Var("x"), 5, "exhaustive",
                          dump_cnf=str(path))
    text = path.read_text()
    assert text.startswith("p cnf ")
    compute_finite_values(vs, Const(BoolV(True)), Var("x"), 5, "sat",
                          dump_cnf=str(path))
    assert path.read_text() == text


def test_bad_backend_and_budget():
    vs = {"x": BOOL}
    with pytest.raises(ValueError):
        compute_finite_values(vs, Const(BoolV(True)), Var("x"), 1, "z3")
    with pytest.raises(ValueError):
        compute_finite_values(vs, Const(BoolV(True)), Var("x"), -1)
    assert set(BACKENDS) == {"exhaustive", "sat", "ipasir"}


@pytest.mark.skipif(not HAVE_IPASIR, reason="WFG_IPASIR_LIB not set")
def test_ipasir_backend_agrees():
    rng = random.Random(5)
    for _ in range(20):
        var_sorts = rand_var_sorts(rng)
        hyp = rand_expr(rng, var_sorts, BOOL, 3)
        trm = rand_expr(rng, var_sorts, rand_sort(rng), 3)
        ref = compute_finite_values(var_sorts, hyp, trm,
                                    _domain(var_sorts) + 1, "exhaustive")
        got = compute_finite_values(var_sorts, hyp, trm,
                                    _domain(var_sorts) + 1, "ipasir")
        assert got == ref
