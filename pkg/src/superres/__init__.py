"""Quantum spectral superresolution toolkit.

Closed-form probabilities and Fisher information for two-tone qubit
sensing, an eigenvalue-scaling superresolution criterion for parametrized
density matrices, seeded Monte Carlo measurement simulation, and the
maximum-likelihood protocols that resolve nearly degenerate frequencies.
"""

__version__ = "0.1.0"

from .analytics import Convention, NoiseSpec, OUParams
from .fisherinfo import DensityMatrix, FisherMatrix, ParamDensityFamily
from .montecarlo import RunSeed, ShotBatch
from .signal import (
    FixedAmpUniformPhase,
    GaussianIID,
    PulsePlan,
    Quadratures,
    TwoToneSignal,
)

__all__ = [
    "Convention",
    "DensityMatrix",
    "FisherMatrix",
    "FixedAmpUniformPhase",
    "GaussianIID",
    "NoiseSpec",
    "OUParams",
    "ParamDensityFamily",
    "PulsePlan",
    "Quadratures",
    "RunSeed",
    "ShotBatch",
    "TwoToneSignal",
    "__version__",
]
