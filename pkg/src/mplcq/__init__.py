"""Multi-plane light conversion design and simulation for entangled photon pairs."""

__version__ = "0.1.0"

from .optics import Grid, ComplexField, ModeSet, gaussian_spot, overlap, superpose, spot_basis
from .engine import MplcGeometry, MaskStack, TransferMatrix, propagate, apply_mask, mplc_forward, mplc_backward, extract_transfer_matrix
from .designer import DesignOptions, DesignReport, design, mask_update, correct_global_phases
from .unitaries import dft, haar_random, block_diag, input_phase_ramp
from .twophoton import TwoPhotonState, CoincidenceTable, pixel_entangled_state, evolve, coincidences, statistical_fidelity, fringe_visibility, porter_thomas_test
from .certification import CertificationResult, certify, certification_thresholds, run_certification_experiment
from .fiber import FiberSpec, v_number, solve_lp, lp_field
