"""Decentralized stochastic optimization simulator.

Snapshot gradient tracking over gossip networks with tunable numbers of
communication (alpha) and computation (beta) steps per round, plus the
matching convergence diagnostics and communication/computation cost models.
"""

from ._flexgt import *  # noqa: F401,F403
from ._flexgt import __version__  # noqa: F401
