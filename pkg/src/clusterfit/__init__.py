"""Least-squares mean-function estimation from repeated measurements.

Modules: ``funclass`` (smoothness classes and rate calculators), ``targets``
(synthetic mean functions), ``datagen`` (clustered data), ``relunet``
(truncated ReLU networks), ``estimator`` / ``splines`` (pooled least squares),
``complexity`` (localized Rademacher averages) and ``harness`` (experiments).
"""
__version__ = "0.1.0"
