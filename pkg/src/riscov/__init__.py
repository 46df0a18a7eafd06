"""Coverage analysis toolkit for RIS-assisted mmWave cellular networks.

Closed-form SIR coverage, reflection power and distance distributions, each
cross-validated against an independent Monte-Carlo stochastic-geometry
simulator.
"""

__version__ = "0.1.0"
