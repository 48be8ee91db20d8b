"""Cell-based compliant-mechanism design toolkit.

A 2D design domain is digitized into a twelve-kind cell vocabulary,
candidate designs are evaluated with an embedded linear frame FE solver,
and a dueling deep-Q agent searches the sequential cell-placement problem
for configurations that maximize a mechanism-specific reward.
"""

__version__ = "0.1.0"

from .cells import CellKind, CellParams, catalog  # noqa: F401
