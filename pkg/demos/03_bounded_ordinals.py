"""Fixed-length tuples, lists of them, and their images below w^w.

Termination arguments here never touch ordinal arithmetic directly; they
compare bounded natural tuples. The ordinals exist to prove those
comparisons well-founded, so the one law that matters is that the
embedding preserves order exactly. This script shows the embedding and
then checks the law on every pair in a small box.
"""

import itertools

from wfgraph.ordinals import (
    bnl_lt,
    bnl_to_ordinal,
    bnll_lt,
    bnll_to_ordinal,
    o_lt,
    ordinal_text,
)

print("a bnl is a fixed-length tuple of naturals under lexicographic order:")
for t in ((0, 0, 0), (0, 2, 5), (3, 0, 1)):
    print(f"  {t}  ->  {ordinal_text(bnl_to_ordinal(t))}")

print("\norder transports across the embedding:")
a, b = (0, 2, 5), (3, 0, 1)
print(f"  bnl_lt{a, b} = {bnl_lt(a, b)}")
print(f"  o_lt of the images = "
      f"{o_lt(bnl_to_ordinal(a), bnl_to_ordinal(b))}")

# A bnll is a list of equal-shape bnls, shorter lists first. The embedding
# is taken at a fixed member count (a system of n processes always carries
# exactly n members): earlier members land on higher powers of w.
print("\nlists of bnls compare length first:")
small, big = [(9, 9)], [(0, 0), (0, 0)]
print(f"  bnll_lt({small}, {big}) = {bnll_lt(small, big)}")
ex = [(1, 0), (0, 2)]
print(f"  at fixed member count 2: {ex} -> "
      f"{ordinal_text(bnll_to_ordinal(2, ex, 2))}")

print("\nexhaustive check of the embedding law, entries < 4:")
for bound in (1, 2, 3):
    vals = list(itertools.product(range(4), repeat=bound))
    images = {v: bnl_to_ordinal(v) for v in vals}
    bad = sum(bnl_lt(x, y) != o_lt(images[x], images[y])
              for x, y in itertools.product(vals, repeat=2))
    print(f"  bound {bound}: {len(vals) ** 2} pairs, {bad} violations")
