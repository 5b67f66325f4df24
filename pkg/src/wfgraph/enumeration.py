"""Bounded enumeration of the values a term takes under a hypothesis.

``compute_finite_values`` asks: over all assignments to the declared
variables satisfying ``hyp``, which distinct values does ``trm`` take?  It
stops after ``num`` values.  ``is_total`` is True exactly when enumeration
finished by exhausting the value set (the final probe found nothing new),
so a result that fills the budget precisely reports is_total=False even if
nothing further exists; callers that need totality pass a budget strictly
above the largest possible count.

Backends:
  exhaustive  vectorized sweep over the variable domains (numpy)
  sat         bit-blast to CNF, enumerate models with the built-in solver,
              blocking each found output pattern
  ipasir      same loop through an external IPASIR shared library
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bitblast import bitblast, dimacs, _lit_val
from .model import Expr, Sort, Value, canonical_sorted
from .sat import make_solver
from .veceval import DEFAULT_ROW_CAP, exhaustive_values

BACKENDS = ("exhaustive", "sat", "ipasir")


@dataclass(frozen=True)
class EnumResult:
    values: tuple[Value, ...]  # distinct, canonically ordered
    is_total: bool
    solve_calls: int


def compute_finite_values(var_sorts: dict[str, Sort], hyp: Expr, trm: Expr,
                          num: int, backend: str = "exhaustive",
                          dump_cnf: Optional[str] = None,
                          row_cap: int = DEFAULT_ROW_CAP) -> EnumResult:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if num < 0:
        raise ValueError("num must be non-negative")

    if dump_cnf is not None:
        circuit = bitblast(trm, hyp, var_sorts)
        with open(dump_cnf, "w") as f:
            f.write(dimacs(circuit, extra_units=(circuit.hyp_lit,)))

    if backend == "exhaustive":
        all_values = exhaustive_values(var_sorts, hyp, trm, row_cap=row_cap)
        if len(all_values) < num:
            return EnumResult(tuple(all_values), True, len(all_values) + 1)
        picked = tuple(all_values[:num])
        return EnumResult(picked, False, len(picked))

    circuit = bitblast(trm, hyp, var_sorts)
    solver = make_solver(circuit.num_vars, backend)
    try:
        for clause in circuit.clauses:
            solver.add_clause(clause)
        solver.add_clause([circuit.hyp_lit])
        values: list[Value] = []
        calls = 0
        is_total = False
        while len(values) < num:
            calls += 1
            if not solver.solve():
                is_total = True
                break
            model = solver.model
            values.append(circuit.decode_output(model))
            solver.add_clause(
                [-l if _lit_val(model, l) else l for l in circuit.outputs])
        return EnumResult(tuple(canonical_sorted(values)), is_total, calls)
    finally:
        close = getattr(solver, "close", None)
        if close:
            close()
