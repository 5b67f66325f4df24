"""Prove relations over finite-state systems well-founded.

The pipeline: describe a system in the finite-domain model language, abstract
it through declared maps into small order-tagged graphs, synthesize a
lexicographic measure per graph by repeated strongly-connected-component
decomposition, and certify the result with checks that are independent of how
the graph and measure were produced.
"""

__version__ = "0.1.0"
