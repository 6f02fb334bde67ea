"""Pulse-level simulator and gate-design toolkit for two transmons with a
strong always-on ZZ interaction.

Subpackages follow the processing chain: ``qcore`` (dense linear algebra
primitives), ``device_model`` (bare Hamiltonians and their effective ZZ
reduction), ``pulse_design`` (two-axis composites, free-evolution CZ,
SWIPHT), ``dynamics`` (unitary and Lindblad propagation), ``experiments``
(randomized benchmarking, state and process tomography), ``estimation``
(maximum-likelihood reconstruction and gate metrics), and ``cli`` (the
batch front end).
"""

from . import (  # noqa: F401
    cli,
    device_model,
    dynamics,
    estimation,
    experiments,
    pulse_design,
    qcore,
)

__version__ = "0.1.0"
