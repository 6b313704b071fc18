"""Prometheus metrics for solver and simulator monitoring."""

from prometheus_client import Counter, Gauge, Histogram, Info

# Package info
overload_info = Info("overload", "Overload fairness toolkit information")

# Linear programs
lp_solves = Counter(
    "lp_solves_total",
    "Total number of dense simplex solves",
    ["status"]
)

# Growth-ray solver
eta_solves = Counter(
    "eta_solves_total",
    "Total number of growth-ray solves",
    ["outcome"]
)

eta_iterations = Histogram(
    "eta_iterations",
    "Projected-gradient iterations per growth-ray solve",
    buckets=(1, 10, 50, 100, 500, 1_000, 5_000, 10_000, 50_000, 100_000)
)

# Fairness control
feasibility_verdicts = Counter(
    "feasibility_verdicts_total",
    "Feasibility checks by verdict",
    ["verdict"]
)

# Simulation
sim_runs = Counter(
    "sim_runs_total",
    "Total number of simulation runs",
    ["policy"]
)

sim_slots = Counter(
    "sim_slots_total",
    "Total number of simulated slots",
    ["policy"]
)

sim_run_duration = Histogram(
    "sim_run_duration_seconds",
    "Wall-clock duration of simulation runs",
    ["policy"]
)

active_runs = Gauge(
    "active_runs",
    "Number of simulation runs in progress"
)
