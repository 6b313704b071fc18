"""Discrete-time simulator of the workload recursion X(t+1) = X(t) + A(t) - D(t)."""
