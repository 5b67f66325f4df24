"""The whole pipeline on the bundled model, one stage at a time.

Enumerate the abstract reachable graph for the per-process rank map, tag
every arc with how each declared measure moves across it, then synthesize
the descriptor table that orders the graph.
"""

from wfgraph.absgraph import map_graph, tag_graph
from wfgraph.bakery import bakery_model
from wfgraph.measure import scc_partition, synthesize_omap
from wfgraph.model import value_text

model = bakery_model(n=2, r=2, w=3)
print(f"model: bakery, params {dict(model.params)}")

# stage 1: close the abstraction of the step relation under successors
g = map_graph(model, "rank")
print(f"\nreachable abstract graph: {len(g.nodes)} nodes, {len(g.arcs)} arcs")
for i, node in enumerate(g.nodes):
    print(f"  node {i:2d}  {value_text(node)}")

# stage 2: tag each arc with the order verdict of every component measure
tg = tag_graph(model, "rank", g)
print(f"\narc tags ({', '.join(tg.measures)}):")
for (i, j) in tg.arcs:
    tags = "  ".join(f"{m}:{tg.tags[(i, j, m)]}" for m in tg.measures)
    print(f"  {i:2d} -> {j:2d}   {tags}")

# stage 3: order the graph. Each strongly connected component either has a
# measure that never grows inside it and strictly falls somewhere, or the
# synthesis would stop with a concrete cycle.
comps = scc_partition(tg)
print(f"\nstrongly connected components, sinks first: "
      f"{[len(c) for c in comps]}")

om = synthesize_omap(tg)
print(f"\ndescriptors (bnl bound {om.bnl_bound}):")
for node, desc in om.descriptors:
    print(f"  {value_text(node):55s} {desc}")
print("\nevery arc now strictly decreases the descriptor measure, which is")
print("the well-foundedness witness the certifier checks independently.")
