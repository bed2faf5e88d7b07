"""rdmstore: an embedded research-data-management engine.

A typed entity-graph store with deontic importance validation, ACID
transactions over a WAL+snapshot backend, an English-like query language
with unit-aware comparisons, role-based access control, and an HTTP/XML
API with a browser query console.
"""

__version__ = "0.1.0"
