"""Growth-ray analysis and fairness control for overloaded parallel queues."""

__version__ = "0.1.0"
