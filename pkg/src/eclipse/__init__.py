"""Adaptive glimpse network for multiple-choice video QA.

The model skips to informative frames, picks a per-frame feature
granularity (coarse vs fine), and can exit reasoning early; the package
also ships the cost accounting, baselines, and a synthetic benchmark
used to measure the accuracy-vs-computation trade-off.
"""

__version__ = "0.1.0"
