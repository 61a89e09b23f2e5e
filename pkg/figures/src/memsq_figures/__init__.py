"""Figure rendering for memsq run/sweep outputs.

Consumes only the documented CSV and manifest schemas and writes
deterministic SVG (fixed fonts, no embedded dates), so outputs are
byte-stable and diffable.
"""

__version__ = "0.1.0"
