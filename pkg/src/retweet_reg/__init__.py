"""Retweet-count regression toolkit: TSV ingestion, feature engineering,
from-scratch CNN/RNN regressors with hand-derived gradients, Adam training,
and a seven-metric evaluation report.
"""

__version__ = "0.1.0"
