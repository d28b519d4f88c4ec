"""Host-symbiont interacting particle systems on site-percolation clusters."""
import os

# The bundled TBB is too old for numba and triggers a warning on every import.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
