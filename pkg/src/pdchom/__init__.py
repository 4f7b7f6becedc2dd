"""Broadband frequency-mode entanglement in parametric down-conversion: joint spectra,
Hong-Ou-Mandel traces, the p > 1/2 witness, Hermite mode analysis and model fitting."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .spectra import (GridSpec, PhasematchModel, ProcessModel, PumpModel, Shape,  # noqa: E402
                      SpectralGrid, SuperpositionModel, build_jsa, reference_model,
                      phasematching, pump_envelope)
from .modes import (HermiteBasis, ModeDecomposition, hermite_function, optimize_basis,  # noqa: E402
                    project, schmidt_decompose, singlet_jsa, singlet_overlap)
from .homi import (Engine, HomTrace, Verdict, hom_analytic, hom_numeric, hom_separable,  # noqa: E402
                   sweep, witness)
from .fitting import FitResult, FitSpec, discriminate_sinc, fit_trace  # noqa: E402
