"""Open quadratic bosonic systems: third-quantization spectra, PT checks and moment dynamics.

Also contains a finite-spin Lindblad and quantum-jump engine used to
cross-check the large-spin (Holstein-Primakoff) picture.
"""
from .errors import (DiscrepancyWarning, IntegrationError, LowConfidenceWarning, ModelError,
                     NoUniqueSolutionError, NoUniqueStationaryError, OpenQuadError, PhaseWarning,
                     UnknownPresetError, ValidityWarning)
from .numerics import EigenClusters, JordanSpec, eig, expm, jordan_structure, solve_sylvester
from .model import (BathVector, HPFrame, QuadraticModel, StructureMatrices, build_bath_matrices,
                    build_structure, hp_observable, hp_occupation, load_model, preset)
from .symmetry import (ParitySpec, SymmetryReport, check_huber, check_matrix_pt,
                       classify_beta_pt)
from .spectrum import (LiouvillianSpectrum, beta_spectrum, enumerate_liouvillian, ep_scan,
                       liouvillian_gap)
from .dynamics import (MomentSeries, MomentState, evolve, evolve_first, evolve_second,
                       hp_initial_state, observable_series, stationary_second)

__version__ = "0.1.0"
