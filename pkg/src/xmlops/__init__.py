"""xmlops: a desk-scale, end-to-end explainable MLOps platform.

Versioned data with full lineage, tracked training, a model/explainer
registry, multi-scheme serving (single/shadow/canary/A-B), drift and
performance monitoring with alerting and retraining triggers, explanation
generation with quality metrics, and a human feedback loop. One file-backed
store, one process, no external services.
"""

__version__ = "0.1.0"

from .canonical import content_hash
from .config import Config
from .platform import Platform

__all__ = ["Config", "Platform", "content_hash", "__version__"]
