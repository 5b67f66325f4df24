"""Why a ready process always exists: the blocking relation is well-founded.

`blok(a, b)` says process a cannot move until b does. The same pipeline
that orders the step relation orders this one, so chasing blockers is a
descent and must bottom out at a process that is free. The scheduler
leans on that: its witness for "someone can move" is the end of the
chain, checked against the synthesized measure at every hop.
"""

import random

from wfgraph.absgraph import map_graph, tag_graph
from wfgraph.bakery import (
    Bakery,
    bake_blok,
    choose_ready,
    pick_blok,
)
from wfgraph.model import value_text
from wfgraph.ordinals import ordinal_text

bakery = Bakery(n=4, r=1, w=3)

g = map_graph(bakery.model, "nlock")
tg = tag_graph(bakery.model, "nlock", g)
print(f"blocking graph: {len(g.nodes)} abstract nodes, {len(g.arcs)} arcs")
for m in tg.measures:
    of = [tg.tags[(i, j, m)] for (i, j) in tg.arcs]
    print(f"  {m}: {of.count('strict-dec')} strict-dec, "
          f"{of.count('non-inc')} non-inc, {of.count('may-inc')} may-inc")

print("\nnodes needing a compound descriptor (the ticket-wait loop):")
for node, desc in bakery.nlock_omap.descriptors:
    if len(desc) > 2:
        print(f"  {value_text(node):38s} {desc}")

# Replay a seeded run and keep the state with the deepest blocker chain
# starting from any process that still has work to do.
rng = random.Random(1)
st = bakery.init()
deepest = (0, st, 0)
while not all(a.done for a in st.trs):
    for s0 in range(bakery.n):
        if st.trs[s0].done:
            continue
        chain, k = [], s0
        while bake_blok(st.trs[k], st.trs):
            k = pick_blok(st.trs[k], st.trs)
            chain.append(k)
        if len(chain) > deepest[0]:
            deepest = (len(chain), st, s0)
    st = bakery.step(st, choose_ready(st.trs, st.sh, rng.choice,
                                      bakery.nlock_msr))

depth, st, k = deepest
print(f"\ndeepest chain seen in a seeded run: {depth} hops")
while True:
    a = st.trs[k]
    m = ordinal_text(bakery.nlock_msr(a))
    if not bake_blok(a, st.trs):
        print(f"  ndx {a.ndx} at loc {a.loc} (pos {a.pos})  measure {m}"
              f"  -- unblocked, ready to step")
        break
    print(f"  ndx {a.ndx} at loc {a.loc} (pos {a.pos})  measure {m}"
          f"  waits on")
    k = pick_blok(a, st.trs)
