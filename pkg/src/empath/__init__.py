"""Empathy classification and rationale extraction pipeline."""

from .estimator import EmpathyClassifier
from .text import MECHANISMS, AnnotatedPair, Vocabulary

__all__ = ["AnnotatedPair", "EmpathyClassifier", "MECHANISMS", "Vocabulary"]
__version__ = "0.1.0"
