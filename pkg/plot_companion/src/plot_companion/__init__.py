"""Figure rendering for netadvect CSV outputs.

Strictly downstream of the solver's CSV files: nothing here recomputes
solver quantities, and the solver never imports this package.
"""

from .csvio import ColumnError, read_convergence, read_snapshots
from .figures import plot_convergence, plot_snapshot

__version__ = "0.1.0"
