"""
Shift Audit - black-box distribution-shift audits via shadow training
"""

__version__ = "1.0.0"
__author__ = "Shift Audit Team"
__description__ = "Audit whether a model's training set was drawn from a normative or a shifted distribution"
