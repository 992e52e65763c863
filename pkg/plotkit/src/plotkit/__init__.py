"""plotkit: batch figure generation from resetcorr result files.

Reads only the documented CSV/JSON outputs; no physics is recomputed here.
"""

__version__ = "0.1.0"

from .jobs import PlotJob, load_job, read_result  # noqa: F401
from .render import render  # noqa: F401
