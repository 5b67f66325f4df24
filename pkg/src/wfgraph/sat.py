"""SAT backends: a built-in DPLL solver and an optional IPASIR bridge.

The built-in solver is deliberately plain: two-watched-literal propagation,
chronological backtracking, decisions on the lowest-indexed unassigned
variable, tried False first.  That makes every run deterministic, which the
enumeration layer relies on for reproducible value orders and solve counts.

The solver is incremental in the way model enumeration needs: clauses added
after a satisfying assignment prune the search in place, so the next
solve() call continues the same depth-first walk instead of restarting.

Set the WFG_IPASIR_LIB environment variable to the path of a shared library
exporting the IPASIR API to enable the ``ipasir`` backend.
"""

from __future__ import annotations

import ctypes
import os
from typing import Optional

_UNASSIGNED = -1
_FALSE = 0
_TRUE = 1

_IMPLIED = 0
_DECISION = 1
_FLIPPED = 2


class DpllSolver:
    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.clauses: list[list[int]] = []
        self.model: list[bool] = []
        self._assign = [_UNASSIGNED] * (num_vars + 1)
        # watches indexed by encoded literal 2*v (positive) / 2*v+1 (negative)
        self._watches: list[list[int]] = [[] for _ in range(2 * (num_vars + 1))]
        self._watched: list[tuple[int, int]] = []
        self._trail: list[int] = []
        self._kind: list[int] = []
        self._units: list[int] = []
        self._prop_head = 0
        self._ok = True

    @staticmethod
    def _enc(lit: int) -> int:
        return 2 * abs(lit) + (0 if lit > 0 else 1)

    def _state(self, lit: int) -> int:
        v = self._assign[abs(lit)]
        if v == _UNASSIGNED:
            return _UNASSIGNED
        return _TRUE if (v == _TRUE) == (lit > 0) else _FALSE

    def _push(self, lit: int, kind: int):
        self._assign[abs(lit)] = _TRUE if lit > 0 else _FALSE
        self._trail.append(lit)
        self._kind.append(kind)

    def _backtrack(self) -> bool:
        """Undo to the most recent unflipped decision and flip it."""
        trail, kind, assign = self._trail, self._kind, self._assign
        while trail:
            lit = trail.pop()
            k = kind.pop()
            assign[abs(lit)] = _UNASSIGNED
            if k == _DECISION:
                self._push(-lit, _FLIPPED)
                self._prop_head = len(trail) - 1
                if self._reassert_units():
                    return True
                # the flipped branch falsifies a unit clause; keep unwinding
        self._prop_head = 0
        return False

    def _reassert_units(self) -> bool:
        """Re-push unit-clause literals the backtrack may have unassigned.

        Unit clauses have no watches, so nothing else restores them after
        their assignment is popped off the trail.
        """
        for l in self._units:
            st = self._state(l)
            if st == _FALSE:
                return False
            if st == _UNASSIGNED:
                self._push(l, _IMPLIED)
        return True

    def add_clause(self, lits: list[int]):
        seen: list[int] = []
        for l in lits:
            if not 1 <= abs(l) <= self.num_vars:
                raise ValueError(f"literal {l} out of range")
            if -l in seen:
                return  # tautology
            if l not in seen:
                seen.append(l)
        cl = seen
        if not cl:
            self._ok = False
            self.clauses.append(cl)
            self._watched.append((0, 0))
            return
        # back out of any region of the tree the new clause forbids
        while self._ok and all(self._state(l) == _FALSE for l in cl):
            if not self._backtrack():
                self._ok = False
        ci = len(self.clauses)
        self.clauses.append(cl)
        if len(cl) == 1:
            self._watched.append((0, 0))
            self._units.append(cl[0])
            if self._ok and self._state(cl[0]) == _UNASSIGNED:
                self._push(cl[0], _IMPLIED)
            return
        if self._ok:
            free = [k for k in range(len(cl)) if self._state(cl[k]) != _FALSE]
            w0 = free[0]
            w1 = free[1] if len(free) > 1 else (1 if w0 == 0 else 0)
            if len(free) == 1 and self._state(cl[w0]) == _UNASSIGNED:
                self._push(cl[w0], _IMPLIED)
        else:
            w0, w1 = 0, 1
        self._watched.append((w0, w1))
        self._watches[self._enc(cl[w0])].append(ci)
        self._watches[self._enc(cl[w1])].append(ci)

    def _propagate(self) -> bool:
        trail = self._trail
        while self._prop_head < len(trail):
            lit = trail[self._prop_head]
            self._prop_head += 1
            wl = self._watches[self._enc(-lit)]
            i = 0
            while i < len(wl):
                ci = wl[i]
                cl = self.clauses[ci]
                w0, w1 = self._watched[ci]
                if cl[w0] == -lit:
                    w0, w1 = w1, w0  # keep the falsified literal in w1
                other = cl[w0]
                st = self._state(other)
                if st == _TRUE:
                    self._watched[ci] = (w0, w1)
                    i += 1
                    continue
                moved = False
                for k in range(len(cl)):
                    if k == w0 or k == w1:
                        continue
                    if self._state(cl[k]) != _FALSE:
                        self._watched[ci] = (w0, k)
                        self._watches[self._enc(cl[k])].append(ci)
                        wl[i] = wl[-1]
                        wl.pop()
                        moved = True
                        break
                if moved:
                    continue
                self._watched[ci] = (w0, w1)
                if st == _FALSE:
                    return False
                self._push(other, _IMPLIED)
                i += 1
        return True

    def solve(self) -> bool:
        if not self._ok:
            return False
        assign = self._assign
        n = self.num_vars
        while True:
            if self._propagate():
                decision = 0
                for v in range(1, n + 1):
                    if assign[v] == _UNASSIGNED:
                        decision = v
                        break
                if decision == 0:
                    self.model = [False] + [assign[v] == _TRUE
                                            for v in range(1, n + 1)]
                    return True
                self._push(-decision, _DECISION)  # try False first
            else:
                if not self._backtrack():
                    self._ok = False
                    return False


class IpasirSolver:
    """ctypes bridge to an IPASIR shared library (one solver per instance)."""

    def __init__(self, num_vars: int, lib_path: str):
        self.num_vars = num_vars
        self._lib = ctypes.CDLL(lib_path)
        self._lib.ipasir_init.restype = ctypes.c_void_p
        self._lib.ipasir_add.argtypes = [ctypes.c_void_p, ctypes.c_int]
        self._lib.ipasir_solve.argtypes = [ctypes.c_void_p]
        self._lib.ipasir_solve.restype = ctypes.c_int
        self._lib.ipasir_val.argtypes = [ctypes.c_void_p, ctypes.c_int]
        self._lib.ipasir_val.restype = ctypes.c_int
        self._lib.ipasir_release.argtypes = [ctypes.c_void_p]
        self._ptr = self._lib.ipasir_init()
        self.model: list[bool] = []

    def add_clause(self, lits: list[int]):
        for l in lits:
            self._lib.ipasir_add(self._ptr, l)
        self._lib.ipasir_add(self._ptr, 0)

    def solve(self) -> bool:
        r = self._lib.ipasir_solve(self._ptr)
        if r == 10:
            self.model = [False]
            for v in range(1, self.num_vars + 1):
                self.model.append(self._lib.ipasir_val(self._ptr, v) > 0)
            return True
        if r == 20:
            return False
        raise RuntimeError(f"ipasir_solve returned {r}")

    def close(self):
        if self._ptr is not None:
            self._lib.ipasir_release(self._ptr)
            self._ptr = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def ipasir_library() -> Optional[str]:
    return os.environ.get("WFG_IPASIR_LIB") or None


def make_solver(num_vars: int, backend: str):
    if backend == "sat":
        return DpllSolver(num_vars)
    if backend == "ipasir":
        path = ipasir_library()
        if not path:
            raise RuntimeError(
                "ipasir backend requested but WFG_IPASIR_LIB is not set")
        return IpasirSolver(num_vars, path)
    raise ValueError(f"unknown SAT backend {backend!r}")
