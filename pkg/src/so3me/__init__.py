"""Multi-rate attitude estimation on the rotation group.

Fuses high-rate rate-gyro readings with sparse inertial direction-vector
measurements using an explicit, Lyapunov-stable discrete-time filter with a
variational (Lagrange-d'Alembert) structure, plus a simulation harness that
generates rigid-body truth, bounded sensor noise, trajectory files, summary
statistics, and plots.
"""
__version__ = "0.1.0"

from . import so3, wahba, measurements, estimator, config, harness, plots  # noqa: F401
