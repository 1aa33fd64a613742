"""Pivot-based representation learning for cross-domain text classification.

The package learns document representations by predicting the occurrence
of pivot features (n-grams frequent in both domains and predictive of the
label) from the remaining non-pivot features, then feeds them, alongside
the original features, to a classifier trained on the source domain.
"""

from ._utils import ValidationError
from .classifier import LogisticRegressionGD
from .corpus import Corpus, Document, load_corpus, tokenize
from .evalharness import ExperimentConfig, run_methods, run_setup
from .features import FeatureSpace, PivotSelector, SparseBinaryVector
from .netrepr import PivotAutoencoder, ReprModel, SgdConfig
from .sclmi import SCLProjector

__all__ = [
    "Corpus",
    "Document",
    "ExperimentConfig",
    "FeatureSpace",
    "LogisticRegressionGD",
    "PivotAutoencoder",
    "PivotSelector",
    "ReprModel",
    "SCLProjector",
    "SgdConfig",
    "SparseBinaryVector",
    "ValidationError",
    "load_corpus",
    "run_methods",
    "run_setup",
    "tokenize",
]

__version__ = "0.1.0"
