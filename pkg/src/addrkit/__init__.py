"""addrkit: noisy address-message datasets, desk-scale taggers, LLM benchmarks.

The package turns clean multinational address corpora into payment-style
noisy training data (versions V0/V1/V2), trains and evaluates a
structurally-constrained sequence tagger on them, and benchmarks
prompt-driven generative parsers with indexed prompts and output repair.
"""

from .schema import (
    ALL_LABELS,
    AUGMENTED_TAGS,
    ORIGINAL_TAGS,
    AddrkitError,
    BaseTag,
    BioLabel,
    Sample,
    to_bio,
    validate_bio,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_LABELS",
    "AUGMENTED_TAGS",
    "ORIGINAL_TAGS",
    "AddrkitError",
    "BaseTag",
    "BioLabel",
    "Sample",
    "to_bio",
    "validate_bio",
    "__version__",
]
