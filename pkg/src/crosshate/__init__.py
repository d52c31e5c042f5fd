"""Zero-shot cross-lingual hate speech detection pipeline.

Subpackages mirror the pipeline stages: ``corpus`` (ingestion and label
harmonization), ``sampling`` (class-ratio adjustment), ``embeddings``
(aligned word vectors and encoding), ``models`` / ``transformer`` (the
three classifier architectures), ``bootstrap`` (ensemble relabeling and
fine-tuning rounds), ``evaluation`` (metrics and comparisons) and
``experiments`` (config-driven runs behind the CLI).
"""

__version__ = "0.1.0"

from .data import ClassCounts, Dataset, Example, Label  # noqa: F401
from .errors import CrosshateError, TrainingDivergedError, ValidationError  # noqa: F401
