"""Figure rendering for hho-stokes outputs.

Reads the solver's whitespace-delimited error tables and ``x y u_x u_y p
mask`` field dumps; no numerical result depends on this package.
"""

from .figures import plot_convergence, plot_enrichment_map, plot_fields
from .tables import (
    ErrorTable,
    FieldDump,
    load_field_dump,
    load_table,
    pressure_difference,
    velocity_difference,
)

__version__ = "0.1.0"
