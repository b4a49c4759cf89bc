"""Statistical inference for ROC curves and AUC."""

__version__ = "0.1.0"
