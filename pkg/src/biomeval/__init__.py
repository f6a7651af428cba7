"""Offline evaluation toolkit for biometric (face) recognition.

Ingests feature templates, fuses set-based templates, scores probe/gallery
similarity, and reports verification (ROC, PR, ACC, EER, AUC) and
identification (CMC, FPIR/FNIR) metrics under comparison, closed-set and
open-set protocols.
"""

__version__ = "0.1.0"

from .errors import BiometricError
from .fusion import FusionMethod, fuse, register_fusion
from .metrics import (RankResult, accuracy, auc, best_threshold, cmc, eer, iet,
                      precision_recall, rank_probes, roc)
from .protocols import (AggregatedCurve, ComparisonProtocol, SearchProtocol, aggregate_curves,
                        kfold_accuracy, run_comparison, run_search)
from .similarity import score_matrix, similarity
from .types import (Curve, ScoreSet, SimilarityMatrix, Template, TemplateStore, orient_scores,
                    validate_template)

__all__ = [
    "AggregatedCurve", "BiometricError", "ComparisonProtocol", "Curve", "FusionMethod",
    "RankResult", "ScoreSet", "SearchProtocol", "SimilarityMatrix", "Template", "TemplateStore",
    "accuracy", "aggregate_curves", "auc", "best_threshold", "cmc", "eer", "fuse", "iet",
    "kfold_accuracy", "orient_scores", "precision_recall", "rank_probes", "register_fusion",
    "roc", "run_comparison", "run_search", "score_matrix", "similarity", "validate_template",
]
