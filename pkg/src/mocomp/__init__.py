"""mocomp: motion-aware image composition.

Routes a foreground/background scenario to one of two branches — a
material point simulation of the inserted object, or a masked
inpainting pass that animates the composite while preserving the
background — and exposes both behind a CLI and a small HTTP service.
"""

__version__ = "0.1.0"

from .errors import MocompError

__all__ = ["MocompError", "__version__"]
