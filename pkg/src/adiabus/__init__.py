"""Adiabatic quantum data-bus simulator for frustrated spin chains."""

__version__ = "0.1.0"

from .basis import (
    BasisState,
    SectorBasis,
    SectorSpec,
    StateVector,
    embed,
    enumerate_sector,
    index_of,
)
from .model import (
    BlochVector,
    Bond,
    CARDINAL_BLOCH,
    ChainModel,
    ProtocolSpec,
    Ramp,
    RampedGroup,
    dynamic_j2_protocol,
    evaluate_protocol,
    ising_chain,
    j1j2_chain,
    join_protocol,
    protocol_from_dict,
    protocol_to_dict,
    reverse_protocol,
    simultaneous_protocol,
    xxz_chain,
    xyz_chain,
    xyz_couplings,
)
from .solver import (
    EigResult,
    PropagatorConfig,
    ScheduleOperator,
    SparseOperator,
    build_sector_operator,
    convergence_refine,
    evolve,
    krylov_expm_apply,
    lowest_eigenpairs,
    sector_gap,
)
from .anneal import (
    AnnealTimeResult,
    FidelityComputer,
    GapGrid,
    SearchSettings,
    TransportResult,
    default_sector,
    fidelity,
    find_anneal_time,
    gap_scan,
    ground_manifold_tracking,
    mg_dimer_state,
    prepare_initial_state,
    transport_qubit,
)
from . import errors

__all__ = [
    "__version__",
    "errors",
    "BasisState",
    "SectorBasis",
    "SectorSpec",
    "StateVector",
    "embed",
    "enumerate_sector",
    "index_of",
    "BlochVector",
    "Bond",
    "CARDINAL_BLOCH",
    "ChainModel",
    "ProtocolSpec",
    "Ramp",
    "RampedGroup",
    "dynamic_j2_protocol",
    "evaluate_protocol",
    "ising_chain",
    "j1j2_chain",
    "join_protocol",
    "protocol_from_dict",
    "protocol_to_dict",
    "reverse_protocol",
    "simultaneous_protocol",
    "xxz_chain",
    "xyz_chain",
    "xyz_couplings",
    "EigResult",
    "PropagatorConfig",
    "ScheduleOperator",
    "SparseOperator",
    "build_sector_operator",
    "convergence_refine",
    "evolve",
    "krylov_expm_apply",
    "lowest_eigenpairs",
    "sector_gap",
    "AnnealTimeResult",
    "FidelityComputer",
    "GapGrid",
    "SearchSettings",
    "TransportResult",
    "default_sector",
    "fidelity",
    "find_anneal_time",
    "gap_scan",
    "ground_manifold_tracking",
    "mg_dimer_state",
    "prepare_initial_state",
    "transport_qubit",
]
