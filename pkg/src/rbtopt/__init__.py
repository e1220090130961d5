"""Reliability-constrained topology optimization.

Minimizes a weighted compliance + volume objective subject to a
rare-event failure-probability constraint.  The constraint enters the
iteration through a penalty on ln P_f whose gradient is estimated from
mini-batch samples by exponential tilting; the probability itself is
re-anchored periodically with subset simulation.
"""

__version__ = "0.1.0"
