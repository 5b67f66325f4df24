"""Vectorized expression evaluation over enumerated environments.

The exhaustive enumeration backend materializes one numpy column per scalar
"atom" (a scalar-sorted variable, or one field of a record variable) and
evaluates expressions over whole columns at once.  Two things keep the tables
small:

* demand analysis: only fields an expression can actually read become
  columns.  Everything else stays out of the cross product entirely.
* staged filtering: the hypothesis is split into conjuncts, and each conjunct
  is applied as soon as the atoms it needs are present, starting with the
  conjunct whose missing atoms span the smallest domain.

Unconstrained atoms never enter the table, which is sound because a
satisfying row extends to full environments by fixing them arbitrarily.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import (
    AddMod, And, BoolSort, BoolV, CaseNat, Const, EnumSort, EnumV, Eq,
    Expr, Field, Ite, Le, Lt, NatSort, NatV, Not, Or, Sort, SubSat, TupleE,
    TupleSort, TupleV, Update, Value, Var, expr_children, infer_sort,
    sort_card)


class Capacity(Exception):
    """The enumeration table would exceed the configured row cap."""

    def __init__(self, rows: int, cap: int):
        super().__init__(f"enumeration needs {rows} rows, cap is {cap}")
        self.rows = rows
        self.cap = cap


DEFAULT_ROW_CAP = 1 << 22


# ---------------------------------------------------------------------------
# scalarization
#
# Vector evaluation is eager, so a record-typed intermediate would force every
# field of its base record into the table whether the query reads it or not.
# Scalarizing first eliminates record intermediates altogether: field access
# is pushed through updates, branches, and tuples until it lands on a
# variable, and record equality is expanded fieldwise.  Afterwards the only
# record-typed nodes left are `Field(Var, f)` leaves and `TupleE` containers.


def field_of(e: Expr, name: str) -> Expr:
    """``e.name`` with the projection pushed as deep as possible."""
    if isinstance(e, Var):
        return Field(e, name)
    if isinstance(e, Const):
        assert isinstance(e.value, TupleV)
        return Const(e.value.get(name))
    if isinstance(e, Update):
        for n, x in e.updates:
            if n == name:
                return x
        return field_of(e.rec, name)
    if isinstance(e, Ite):
        return Ite(e.cond, field_of(e.then, name), field_of(e.alt, name))
    if isinstance(e, CaseNat):
        return CaseNat(e.scrut,
                       tuple((k, field_of(b, name)) for k, b in e.arms),
                       field_of(e.default, name))
    if isinstance(e, TupleE):
        for n, x in e.items:
            if n == name:
                return x
        raise KeyError(name)
    if isinstance(e, Field):
        raise TypeError("nested record sorts are not supported")
    raise TypeError(f"no field projection on {type(e).__name__}")


def scalarize(e: Expr, var_sorts: dict[str, Sort]) -> Expr:
    """Rewrite ``e`` so no record-typed intermediate remains (see above).
    Semantics are preserved exactly; only the tree shape changes."""

    def record_fields(x: Expr) -> Optional[tuple[tuple[str, Sort], ...]]:
        s = infer_sort(x, var_sorts)
        if isinstance(s, TupleSort):
            return s.fields
        return None

    def expand(x: Expr) -> Expr:
        """A record-sorted expression as an explicit named TupleE."""
        fields = record_fields(x)
        assert fields is not None
        if isinstance(x, TupleE):
            return TupleE(tuple((n, walk(item)) for n, item in x.items))
        return TupleE(tuple((n, walk(field_of(x, n))) for n, _ in fields))

    def walk(x: Expr) -> Expr:
        if isinstance(x, (Var, Const)):
            return x
        if isinstance(x, Field):
            return walk(field_of(x.rec, x.name)) if not isinstance(x.rec, Var) else x
        if isinstance(x, Eq):
            fields = record_fields(x.a)
            if fields is not None:
                return And(tuple(Eq(walk(field_of(x.a, n)), walk(field_of(x.b, n)))
                                 for n, _ in fields))
            return Eq(walk(x.a), walk(x.b))
        if isinstance(x, (Update, Ite, CaseNat)) and record_fields(x) is not None:
            if isinstance(x, Ite):
                return Ite(walk(x.cond), expand(x.then), expand(x.alt))
            if isinstance(x, CaseNat):
                return CaseNat(walk(x.scrut),
                               tuple((k, expand(b)) for k, b in x.arms),
                               expand(x.default))
            return expand(x)
        if isinstance(x, TupleE):
            return TupleE(tuple((n, walk(item)) for n, item in x.items))
        if isinstance(x, Ite):
            return Ite(walk(x.cond), walk(x.then), walk(x.alt))
        if isinstance(x, CaseNat):
            return CaseNat(walk(x.scrut), tuple((k, walk(b)) for k, b in x.arms),
                           walk(x.default))
        if isinstance(x, (Lt, Le, AddMod, SubSat)):
            return type(x)(walk(x.a), walk(x.b))
        if isinstance(x, Not):
            return Not(walk(x.a))
        if isinstance(x, (And, Or)):
            return type(x)(tuple(walk(a) for a in x.args))
        raise TypeError(f"not an expression: {x!r}")

    out = walk(e)
    if record_fields(out) is not None and not isinstance(out, TupleE):
        out = expand(out)
    return out


# ---------------------------------------------------------------------------
# demand analysis

ALL = "all"  # demand sentinel: the whole value is needed

Demand = Union[str, frozenset]  # ALL or a set of field names
AtomKey = tuple[str, Optional[str]]  # (variable, field); field None for scalars


def _merge_demand(out: dict[str, Demand], var: str, d: Demand):
    cur = out.get(var)
    if cur == ALL:
        return
    if d == ALL:
        out[var] = ALL
    else:
        out[var] = (cur or frozenset()) | d


def demanded_reads(e: Expr, demand: Demand, out: Optional[dict[str, Demand]] = None
                   ) -> dict[str, Demand]:
    """Which (variable, field) slots can influence the ``demand``ed part of
    ``e``.  Unlike a plain free-variable walk, a record update only pulls in
    the base-record fields that survive into the demanded projection."""
    if out is None:
        out = {}
    if isinstance(e, Var):
        _merge_demand(out, e.name, demand)
        return out
    if isinstance(e, Const):
        return out
    if isinstance(e, Field):
        demanded_reads(e.rec, frozenset((e.name,)), out)
        return out
    if isinstance(e, Update):
        if demand == ALL:
            demanded_reads(e.rec, ALL, out)
            for _, x in e.updates:
                demanded_reads(x, ALL, out)
        else:
            updated = {n: x for n, x in e.updates}
            passthru = frozenset(f for f in demand if f not in updated)
            if passthru:
                demanded_reads(e.rec, passthru, out)
            for f in demand:
                if f in updated:
                    demanded_reads(updated[f], ALL, out)
        return out
    if isinstance(e, Ite):
        demanded_reads(e.cond, ALL, out)
        demanded_reads(e.then, demand, out)
        demanded_reads(e.alt, demand, out)
        return out
    if isinstance(e, CaseNat):
        demanded_reads(e.scrut, ALL, out)
        for _, body in e.arms:
            demanded_reads(body, demand, out)
        demanded_reads(e.default, demand, out)
        return out
    if isinstance(e, TupleE):
        if demand == ALL:
            for _, x in e.items:
                demanded_reads(x, ALL, out)
        else:
            for n, x in e.items:
                if n in demand:
                    demanded_reads(x, ALL, out)
        return out
    # scalar operators consume their operands whole
    for c in expr_children(e):
        demanded_reads(c, ALL, out)
    return out


def atoms_for(exprs: list[Expr], var_sorts: dict[str, Sort]) -> list[AtomKey]:
    """The atom columns needed to evaluate all of ``exprs``, in deterministic
    order (variable declaration order, then field declaration order)."""
    demand: dict[str, Demand] = {}
    for e in exprs:
        demanded_reads(e, ALL, demand)
    keys: list[AtomKey] = []
    for var, sort in var_sorts.items():
        if var not in demand:
            continue
        d = demand[var]
        if isinstance(sort, TupleSort):
            for fname, _ in sort.fields:
                if d == ALL or fname in d:
                    keys.append((var, fname))
        else:
            keys.append((var, None))
    return keys


def atom_sort(key: AtomKey, var_sorts: dict[str, Sort]) -> Sort:
    var, fld = key
    s = var_sorts[var]
    if fld is None:
        return s
    assert isinstance(s, TupleSort)
    return s.field_sort(fld)


def _atom_domain(s: Sort) -> np.ndarray:
    if isinstance(s, BoolSort):
        return np.array([False, True])
    if isinstance(s, NatSort):
        return np.arange(1 << s.width, dtype=np.int64)
    if isinstance(s, EnumSort):
        return np.arange(len(s.syms), dtype=np.int64)
    raise TypeError("record-valued atom")


# ---------------------------------------------------------------------------
# vector values


@dataclass
class VBool:
    arr: np.ndarray


@dataclass
class VNat:
    arr: np.ndarray
    width: int


@dataclass
class VEnum:
    arr: np.ndarray  # indices
    syms: tuple[str, ...]


@dataclass
class VRec:
    items: tuple[tuple[Optional[str], "VVal"], ...]

    def get(self, name: str) -> "VVal":
        for n, v in self.items:
            if n == name:
                return v
        raise KeyError(name)


VVal = Union[VBool, VNat, VEnum, VRec]


def _vconst(v: Value) -> VVal:
    if isinstance(v, BoolV):
        return VBool(np.bool_(v.val))
    if isinstance(v, NatV):
        return VNat(np.int64(v.val), v.width)
    if isinstance(v, EnumV):
        return VEnum(np.int64(v.index), v.syms)
    return VRec(tuple((n, _vconst(x)) for n, x in v.items))


def _veq(a: VVal, b: VVal) -> np.ndarray:
    if isinstance(a, VRec):
        assert isinstance(b, VRec) and len(a.items) == len(b.items)
        acc = np.bool_(True)
        for (n1, x), (n2, y) in zip(a.items, b.items):
            assert n1 == n2
            acc = acc & _veq(x, y)
        return acc
    return a.arr == b.arr


def _vwhere(mask: np.ndarray, a: VVal, b: VVal) -> VVal:
    if isinstance(a, VBool):
        return VBool(np.where(mask, a.arr, b.arr))
    if isinstance(a, VNat):
        assert isinstance(b, VNat) and a.width == b.width
        return VNat(np.where(mask, a.arr, b.arr), a.width)
    if isinstance(a, VEnum):
        return VEnum(np.where(mask, a.arr, b.arr), a.syms)
    assert isinstance(a, VRec) and isinstance(b, VRec)
    return VRec(tuple((n, _vwhere(mask, x, y))
                      for (n, x), (_, y) in zip(a.items, b.items)))


class Table:
    """Environments as parallel columns, one per atom present."""

    def __init__(self, var_sorts: dict[str, Sort], row_cap: int = DEFAULT_ROW_CAP):
        self.var_sorts = var_sorts
        self.row_cap = row_cap
        self.n = 1
        self.cols: dict[AtomKey, np.ndarray] = {}

    def extend(self, keys: list[AtomKey]):
        """Cross the table with the full domains of the given missing atoms."""
        keys = [k for k in keys if k not in self.cols]
        if not keys:
            return
        domains = [_atom_domain(atom_sort(k, self.var_sorts)) for k in keys]
        factor = 1
        for d in domains:
            factor *= len(d)
        new_n = self.n * factor
        if new_n > self.row_cap:
            raise Capacity(new_n, self.row_cap)
        for k in self.cols:
            self.cols[k] = np.repeat(self.cols[k], factor)
        tile = self.n
        trailing = factor
        for k, dom in zip(keys, domains):
            trailing //= len(dom)
            self.cols[k] = np.tile(np.repeat(dom, trailing), tile)
            tile *= len(dom)
        self.n = new_n

    def filter(self, mask: np.ndarray):
        if mask.ndim == 0:
            if not bool(mask):
                self.n = 0
                for k in self.cols:
                    self.cols[k] = self.cols[k][:0]
            return
        for k in self.cols:
            self.cols[k] = self.cols[k][mask]
        self.n = int(mask.sum())

    def var_vval(self, name: str) -> VVal:
        s = self.var_sorts[name]
        if isinstance(s, TupleSort):
            return VRec(tuple((f, self._col_vval((name, f), fs))
                              for f, fs in s.fields if (name, f) in self.cols))
        return self._col_vval((name, None), s)

    def _col_vval(self, key: AtomKey, s: Sort) -> VVal:
        arr = self.cols[key]
        if isinstance(s, BoolSort):
            return VBool(arr.astype(bool) if arr.dtype != np.bool_ else arr)
        if isinstance(s, NatSort):
            return VNat(arr, s.width)
        if isinstance(s, EnumSort):
            return VEnum(arr, s.syms)
        raise TypeError("record-valued atom")


def eval_vec(e: Expr, table: Table) -> VVal:
    """Vectorized mirror of ``eval_expr``; one result lane per table row."""
    if isinstance(e, Var):
        return table.var_vval(e.name)
    if isinstance(e, Const):
        return _vconst(e.value)
    if isinstance(e, Field):
        rec = eval_vec(e.rec, table)
        assert isinstance(rec, VRec)
        return rec.get(e.name)
    if isinstance(e, Update):
        rec = eval_vec(e.rec, table)
        assert isinstance(rec, VRec)
        news = {n: eval_vec(x, table) for n, x in e.updates}
        return VRec(tuple((n, news.get(n, v)) for n, v in rec.items))
    if isinstance(e, Ite):
        c = eval_vec(e.cond, table)
        assert isinstance(c, VBool)
        return _vwhere(c.arr, eval_vec(e.then, table), eval_vec(e.alt, table))
    if isinstance(e, Eq):
        return VBool(_veq(eval_vec(e.a, table), eval_vec(e.b, table)))
    if isinstance(e, Lt):
        a, b = eval_vec(e.a, table), eval_vec(e.b, table)
        assert isinstance(a, VNat) and isinstance(b, VNat)
        return VBool(a.arr < b.arr)
    if isinstance(e, Le):
        a, b = eval_vec(e.a, table), eval_vec(e.b, table)
        assert isinstance(a, VNat) and isinstance(b, VNat)
        return VBool(a.arr <= b.arr)
    if isinstance(e, AddMod):
        a, b = eval_vec(e.a, table), eval_vec(e.b, table)
        assert isinstance(a, VNat) and isinstance(b, VNat) and a.width == b.width
        return VNat((a.arr + b.arr) & ((1 << a.width) - 1), a.width)
    if isinstance(e, SubSat):
        a, b = eval_vec(e.a, table), eval_vec(e.b, table)
        assert isinstance(a, VNat) and isinstance(b, VNat) and a.width == b.width
        return VNat(np.maximum(a.arr - b.arr, 0), a.width)
    if isinstance(e, Not):
        a = eval_vec(e.a, table)
        assert isinstance(a, VBool)
        return VBool(~np.asarray(a.arr))
    if isinstance(e, (And, Or)):
        acc = np.bool_(isinstance(e, And))
        for x in e.args:
            v = eval_vec(x, table)
            assert isinstance(v, VBool)
            acc = (acc & v.arr) if isinstance(e, And) else (acc | v.arr)
        return VBool(acc)
    if isinstance(e, TupleE):
        return VRec(tuple((n, eval_vec(x, table)) for n, x in e.items))
    if isinstance(e, CaseNat):
        scrut = eval_vec(e.scrut, table)
        assert isinstance(scrut, VNat)
        result = eval_vec(e.default, table)
        for key, body in reversed(e.arms):
            result = _vwhere(scrut.arr == key, eval_vec(body, table), result)
        return result
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# staged hypothesis filtering


def split_conjuncts(e: Expr) -> list[Expr]:
    """Flatten nested conjunctions and record-vs-constant equalities into a
    list of small conjuncts for staged filtering."""
    out: list[Expr] = []

    def walk(x: Expr):
        if isinstance(x, And):
            for c in x.args:
                walk(c)
            return
        if isinstance(x, Const) and x.value == BoolV(True):
            return
        if isinstance(x, Eq):
            a, b = x.a, x.b
            if isinstance(b, TupleE) and isinstance(a, Const):
                a, b = b, a
            if isinstance(a, TupleE) and isinstance(b, Const) \
                    and isinstance(b.value, TupleV) \
                    and len(a.items) == len(b.value.items):
                for (n1, item), (n2, val) in zip(a.items, b.value.items):
                    if n1 != n2:
                        break
                else:
                    for (_, item), (_, val) in zip(a.items, b.value.items):
                        walk(Eq(item, Const(val)))
                    return
        out.append(x)

    walk(e)
    return out


def build_table(var_sorts: dict[str, Sort], hyp: Expr, trm_exprs: list[Expr],
                row_cap: int = DEFAULT_ROW_CAP) -> Table:
    """Table of exactly the environments (projected to read atoms) that
    satisfy ``hyp``, extended to cover the atoms of ``trm_exprs``.

    Callers pass already-scalarized expressions (see ``scalarize``)."""
    table = Table(var_sorts, row_cap)
    pending = split_conjuncts(hyp)
    while pending:
        def missing_span(c: Expr) -> int:
            span = 1
            for k in atoms_for([c], var_sorts):
                if k not in table.cols:
                    span *= sort_card(atom_sort(k, var_sorts))
            return span

        best_ix = min(range(len(pending)), key=lambda i: missing_span(pending[i]))
        conj = pending.pop(best_ix)
        table.extend(atoms_for([conj], var_sorts))
        if table.n:
            mask = eval_vec(conj, table)
            assert isinstance(mask, VBool)
            table.filter(np.broadcast_to(mask.arr, (table.n,)))
    table.extend(atoms_for(trm_exprs, var_sorts))
    return table


# ---------------------------------------------------------------------------
# row extraction


def vval_leaves(v: VVal) -> list[VVal]:
    """Scalar leaves in canonical traversal order (record fields in order)."""
    if isinstance(v, VRec):
        out: list[VVal] = []
        for _, x in v.items:
            out.extend(vval_leaves(x))
        return out
    return [v]


def _leaf_value(leaf: VVal, code: int) -> Value:
    if isinstance(leaf, VBool):
        return BoolV(bool(code))
    if isinstance(leaf, VNat):
        return NatV(int(code), leaf.width)
    if isinstance(leaf, VEnum):
        return EnumV(leaf.syms[int(code)], leaf.syms)
    raise TypeError("not a scalar leaf")


def _rebuild(v: VVal, codes: list[int], pos: list[int]) -> Value:
    if isinstance(v, VRec):
        return TupleV(tuple((n, _rebuild(x, codes, pos)) for n, x in v.items))
    i = pos[0]
    pos[0] += 1
    return _leaf_value(v, codes[i])


def distinct_rows(v: VVal, n_rows: int) -> list[Value]:
    """Distinct values of ``v`` across the table rows, canonically ordered.

    Leaf codes are stacked into an integer matrix and uniqued row-wise;
    because every leaf's numeric code is ordered the same way as the
    canonical Value order within its sort, the lexicographic row order numpy
    produces IS the canonical order.
    """
    if n_rows == 0:
        return []
    leaves = vval_leaves(v)
    if not leaves:
        return [_rebuild(v, [], [0])]
    mat = np.column_stack([
        np.broadcast_to(np.asarray(leaf.arr, dtype=np.int64), (n_rows,))
        for leaf in leaves])
    uniq = np.unique(mat, axis=0)
    return [_rebuild(v, [int(c) for c in row], [0]) for row in uniq]


def exhaustive_values(var_sorts: dict[str, Sort], hyp: Expr, trm: Expr,
                      row_cap: int = DEFAULT_ROW_CAP) -> list[Value]:
    """All distinct values of ``trm`` over environments satisfying ``hyp``,
    canonically ordered.  The reference backend behind compute-finite-values."""
    hyp_s = scalarize(hyp, var_sorts)
    trm_s = scalarize(trm, var_sorts)
    table = build_table(var_sorts, hyp_s, [trm_s], row_cap)
    if table.n == 0:
        return []
    return distinct_rows(eval_vec(trm_s, table), table.n)
