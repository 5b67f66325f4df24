"""Bounded natural lists, their orders, and ordinals below omega^omega.

A bnl is a fixed-length tuple of naturals compared lexicographically
(leftmost entry most significant).  A bnll is a list of bnls sharing one
inner length; bnlls are ordered length-first (a shorter list is smaller),
then position-wise by bnl order.  Both embed order-preservingly into
Cantor-normal-form ordinals, which is what makes them usable as
termination measures: o_lt has no infinite descending chains.

Measure construction: an omap assigns each abstract node a descriptor
mixing naturals (component ranks) and measure names.  ``mk_bnl`` expands
the descriptor of a concrete state's node, substituting the state's
measure tuples for names, and right-pads with zeros to the common bound;
``msr`` is its ordinal image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

Bnl = tuple[int, ...]
DescEntry = Union[int, str]
Descriptor = tuple[DescEntry, ...]


class OrdinalError(ValueError):
    pass


def _check_bnl(a: Sequence[int]) -> None:
    for n in a:
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise OrdinalError(f"bnl entry {n!r} is not a natural")


def bnl_lt(a: Sequence[int], b: Sequence[int]) -> bool:
    _check_bnl(a)
    _check_bnl(b)
    if len(a) != len(b):
        raise OrdinalError(f"bnl bound mismatch: {len(a)} vs {len(b)}")
    return tuple(a) < tuple(b)


def bnl_le(a: Sequence[int], b: Sequence[int]) -> bool:
    return not bnl_lt(b, a)


def bnll_lt(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> bool:
    inner = {len(x) for x in a} | {len(x) for x in b}
    if len(inner) > 1:
        raise OrdinalError(f"bnll inner bounds differ: {sorted(inner)}")
    if len(a) != len(b):
        return len(a) < len(b)
    for x, y in zip(a, b):
        if bnl_lt(x, y):
            return True
        if bnl_lt(y, x):
            return False
    return False


def bnll_le(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> bool:
    return not bnll_lt(b, a)


@dataclass(frozen=True)
class Ordinal:
    """Cantor normal form below omega^omega: terms (exponent, coefficient)
    with exponents strictly decreasing and coefficients positive.  The
    empty term list is zero."""

    terms: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not is_ordinal(self):
            raise OrdinalError(f"not in Cantor normal form: {self.terms}")


def is_ordinal(a: Ordinal) -> bool:
    prev = None
    for t in a.terms:
        if not (isinstance(t, tuple) and len(t) == 2):
            return False
        e, c = t
        if not (isinstance(e, int) and isinstance(c, int)):
            return False
        if e < 0 or c < 1:
            return False
        if prev is not None and e >= prev:
            return False
        prev = e
    return True


def o_lt(a: Ordinal, b: Ordinal) -> bool:
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        if ea != eb:
            return ea < eb
        if ca != cb:
            return ca < cb
    return len(a.terms) < len(b.terms)


def o_le(a: Ordinal, b: Ordinal) -> bool:
    return not o_lt(b, a)


def ordinal_text(a: Ordinal) -> str:
    if not a.terms:
        return "0"
    parts = []
    for e, c in a.terms:
        if e == 0:
            parts.append(str(c))
        elif e == 1:
            parts.append(f"w*{c}")
        else:
            parts.append(f"w^{e}*{c}")
    return " + ".join(parts)


def bnl_to_ordinal(a: Sequence[int]) -> Ordinal:
    _check_bnl(a)
    k = len(a)
    return Ordinal(tuple((k - 1 - i, n) for i, n in enumerate(a) if n > 0))


def bnll_to_ordinal(length: int, a: Sequence[Sequence[int]], bound: int
                    ) -> Ordinal:
    """Ordinal image of a bnll of ``length`` members, each of length
    ``bound``: the bnl order of the concatenation, so a member boundary is
    an omega^bound jump."""
    if len(a) != length:
        raise OrdinalError(f"bnll length {len(a)} does not match {length}")
    flat: list[int] = []
    for x in a:
        if len(x) != bound:
            raise OrdinalError(f"bnll member length {len(x)}, expected {bound}")
        flat.extend(x)
    return bnl_to_ordinal(flat)


# -- descriptor expansion -------------------------------------------------

def expand_descriptor(desc: Descriptor,
                      measure_values: Mapping[str, Sequence[int]]
                      ) -> list[int]:
    out: list[int] = []
    for entry in desc:
        if isinstance(entry, str):
            if entry not in measure_values:
                raise OrdinalError(f"unknown measure symbol {entry!r}")
            out.extend(measure_values[entry])
        else:
            out.append(entry)
    return out


def descriptor_length(desc: Descriptor, widths: Mapping[str, int]) -> int:
    n = 0
    for entry in desc:
        if isinstance(entry, str):
            if entry not in widths:
                raise OrdinalError(f"unknown measure symbol {entry!r}")
            n += widths[entry]
        else:
            n += 1
    return n


def bnl_bnd(descriptors: Iterable[Descriptor],
            widths: Mapping[str, int]) -> int:
    """Common bnl length: the longest expanded descriptor."""
    return max((descriptor_length(d, widths) for d in descriptors),
               default=0)


def mk_bnl(x, descriptors: Mapping[object, Descriptor],
           widths: Mapping[str, int],
           map_e: Callable[[object], object],
           map_o: Callable[[object, str], Sequence[int]]) -> Bnl:
    """Measure value of concrete state ``x``: its node's descriptor with
    measure names replaced by the state's measure tuples, zero-padded on
    the right to the common bound."""
    node = map_e(x)
    if node not in descriptors:
        raise OrdinalError(
            f"state maps to a node outside the omap: {node!r}")
    values = {name: tuple(map_o(x, name)) for name in widths}
    for name, v in values.items():
        if len(v) != widths[name]:
            raise OrdinalError(
                f"measure {name!r} produced width {len(v)}, "
                f"declared {widths[name]}")
    expanded = expand_descriptor(descriptors[node], values)
    bound = bnl_bnd(descriptors.values(), widths)
    return tuple(expanded) + (0,) * (bound - len(expanded))


def msr(x, descriptors: Mapping[object, Descriptor],
        widths: Mapping[str, int],
        map_e: Callable[[object], object],
        map_o: Callable[[object, str], Sequence[int]]) -> Ordinal:
    return bnl_to_ordinal(mk_bnl(x, descriptors, widths, map_e, map_o))
