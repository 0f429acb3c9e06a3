"""Chern and Z2 (Kramers parity) invariants of Bloch projector fields on
the 2-torus, computed through continuous parallel transport, matching
matrices and symplectic square roots, together with the structural
constructions they certify: time-reversal symmetric splittings with
prescribed Chern parity, pseudo-periodic Bloch frames, and symmetric
unitary equivalences.
"""

from .errors import (
    BandTopoError,
    BranchCutFailure,
    ConfigError,
    ContractionFailure,
    GapClosed,
    GenerationFailed,
    IntegralityViolation,
    InvalidInput,
    ModelConstructionError,
    NotInvariant,
    ObstructedLoop,
    OddQuaternionicDimension,
    ParityObstruction,
    RefinementNeeded,
    SingularFactor,
    SymmetryBroken,
    TooFar,
    Unresolved,
)
from .linalg import (
    LoopHomotopy,
    PhaseLoop,
    UnitaryLoop,
    connect_loops,
    contract_loop,
    eigh,
    inv_sqrt_psd,
    unitary_log,
    winding,
)
from .trs import (
    Grid2,
    ProjectionField,
    QuaternionicBasis,
    SampledProjectionField,
    TRSStructure,
    constant_field,
    direct_sum_fields,
    quaternionic_basis,
    trs_conjugate_field,
    validate_field,
)
from .models import (
    BlochHamiltonian,
    GapWindow,
    gauge_transform,
    haldane,
    kane_mele,
    load_bloch,
    random_gapped_hamiltonian,
    random_gauge_map,
    random_trs_hamiltonian,
    save_bloch,
    spectral_projector,
)
from .transport import TransportSheet, kato_nagy, transport_1d, transport_2d
from .invariants import (
    InvariantReport,
    MatchingFamily,
    chern,
    delta,
    fhs_chern,
    matching_family,
    wilson_z2,
)
from .decomposition import (
    EquivalenceResult,
    FrameField,
    GluingMatrixPath,
    SplitCertificate,
    complement_field,
    load_frame,
    pseudo_periodic_frame,
    save_frame,
    split,
    symmetric_equivalence,
    symmetric_frame,
    verify_homotopy,
)

__version__ = "0.1.0"
