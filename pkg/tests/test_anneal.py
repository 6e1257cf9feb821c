import math

import numpy as np
import pytest

from adiabus.basis import SectorSpec, enumerate_sector
from adiabus.errors import (
    AmbiguousInitial,
    Disconnected,
    EvenLengthRequired,
    InputSiteCoupled,
    NoConvergence,
    OddLengthRequired,
)
from adiabus.model import (
    BlochVector,
    Bond,
    ProtocolSpec,
    Ramp,
    RampedGroup,
    dynamic_j2_protocol,
    evaluate_protocol,
    j1j2_chain,
    join_protocol,
    simultaneous_protocol,
    xyz_couplings,
)
from adiabus import anneal
from adiabus.anneal import (
    FidelityComputer,
    SearchSettings,
    fidelity,
    find_anneal_time,
    gap_scan,
    ground_manifold_tracking,
    mg_dimer_state,
    prepare_initial_state,
    transport_qubit,
)
from adiabus.solver import build_sector_operator

from oracles import dense_sector_block

K1_3 = SectorSpec.magnetization(3, 1)


# ------------------------------------------------------------- preparation

def test_prepare_join_three_sites():
    psi = prepare_initial_state(join_protocol(3, 1.0, 0.0), K1_3)
    assert np.allclose(psi.amplitudes, [1 / math.sqrt(2), -1 / math.sqrt(2), 0.0])


def test_prepare_matches_direct_ground_state():
    # dimer-point subchain: the product of singlets is the exact ground state
    p = dynamic_j2_protocol(5, 1.0, 0.2)
    spec = SectorSpec.magnetization(5, 2)
    psi = prepare_initial_state(p, spec)
    block = dense_sector_block(
        evaluate_protocol(p, 0.0), spec
    )
    evals, evecs = np.linalg.eigh(block)
    overlap = abs(np.vdot(evecs[:, 0], psi.amplitudes))
    assert overlap > 1.0 - 1e-10
    # and it is literally singlet(1,2) x singlet(3,4) x down(5)
    mg4 = mg_dimer_state(4)
    target = enumerate_sector(spec)
    expect = np.zeros(target.dimension, dtype=complex)
    for mask, amp in zip(np.nonzero(mg4.amplitudes)[0], mg4.amplitudes[np.nonzero(mg4.amplitudes)[0]]):
        expect[np.searchsorted(target.states, mask)] = amp
    assert abs(abs(np.vdot(expect, psi.amplitudes)) - 1.0) < 1e-10


def test_prepare_disconnected():
    # both end bonds ramp from zero: two free sites at s=0
    static = tuple(Bond.heisenberg(i, i + 1, 1.0) for i in range(2, 4))
    ramped = RampedGroup(
        Ramp.linear(0.0, 1.0),
        (Bond.heisenberg(1, 2, 1.0), Bond.heisenberg(4, 5, 1.0)),
    )
    p = ProtocolSpec(n_spins=5, static_bonds=static, ramped_groups=(ramped,))
    with pytest.raises(Disconnected):
        prepare_initial_state(p, SectorSpec.magnetization(5, 2))


def test_prepare_ambiguous_on_frustrated_subchain():
    # triangle subchain at J1=J2=1 has a degenerate sector ground state
    with pytest.raises(AmbiguousInitial):
        prepare_initial_state(join_protocol(4, 1.0, 1.0), SectorSpec.magnetization(4, 2))


def test_prepare_full_sector_is_ambiguous():
    with pytest.raises(AmbiguousInitial):
        prepare_initial_state(join_protocol(3, 1.0, 0.0), SectorSpec.full(3))


# ---------------------------------------------------------------- fidelity

def test_sudden_quench_overlap():
    f = fidelity(join_protocol(3, 1.0, 0.0), 0.0, K1_3)
    assert abs(f - math.sqrt(3.0) / 2.0) < 1e-9


def test_adiabatic_limit_small_chain():
    assert fidelity(join_protocol(3, 1.0, 0.0), 200.0, K1_3) >= 0.999


def test_fidelity_bounded_by_one():
    p = join_protocol(5, 1.0, 0.45)
    comp = FidelityComputer(p, SectorSpec.magnetization(5, 2))
    for tau in (0.0, 0.7, 3.0, 11.0):
        f = comp.value(tau)
        assert 0.0 <= f <= 1.0 + 1e-9


# --------------------------------------------------------------- tau search

def test_find_anneal_time_small_chain():
    r = find_anneal_time(join_protocol(3, 1.0, 0.0), K1_3, 0.9)
    assert r.reached and r.tau_star is not None
    assert r.fidelity_at_tau_star >= 0.9
    assert r.tau_star <= 10.0


def test_find_anneal_time_trivial_protocol():
    model = j1j2_chain(5, 1.0, 0.2)
    p = ProtocolSpec(n_spins=5, static_bonds=model.bonds, label="static")
    r = find_anneal_time(p, SectorSpec.magnetization(5, 2), 0.9)
    assert r.reached and r.tau_star == 0.0


def test_find_anneal_time_cap_not_reached():
    # strongly frustrated joining needs tau ~ 8 here; a tight cap gives up
    # gracefully instead of erroring
    r = find_anneal_time(
        join_protocol(9, 1.0, 0.7),
        SectorSpec.magnetization(9, 4),
        target=0.9,
        search=SearchSettings(tau0=1.0, tau_cap=3.0),
    )
    assert not r.reached
    assert r.status == "not-reached"
    assert r.tau_star is None and r.fidelity_at_tau_star is None
    assert r.cap == 3.0
    assert all(f < 0.9 for _, f in r.trace)


def test_find_anneal_time_rejects_bad_target():
    with pytest.raises(ValueError):
        find_anneal_time(join_protocol(3, 1.0, 0.0), K1_3, target=1.5)


# ----------------------------------------------------------------- gap scan

def test_gap_scan_known_cells():
    grid = gap_scan(
        lambda j2: join_protocol(3, 1.0, j2),
        [1.0],
        [0.0, 1.0],
        K1_3,
    )
    assert np.isclose(grid.gaps[0, 0], 4.0)
    assert abs(grid.gaps[0, 1]) < 1e-9


def test_gap_scan_slice_matches_sector_gap():
    from adiabus.solver import sector_gap

    spec = SectorSpec.magnetization(5, 2)
    grid = gap_scan(lambda j2: join_protocol(5, 1.0, j2), [0.4, 1.0], [0.2], spec)
    for js, s in enumerate((0.4, 1.0)):
        model = evaluate_protocol(join_protocol(5, 1.0, 0.2), s)
        assert np.isclose(grid.gaps[js, 0], sector_gap(model, spec))


def test_gap_scan_records_failed_cells_as_nan(monkeypatch):
    def explode(model, spec, tol=1e-10):
        raise NoConvergence("forced failure")

    monkeypatch.setattr(anneal, "sector_gap", explode)
    grid = gap_scan(lambda j2: join_protocol(3, 1.0, j2), [0.5], [0.0], K1_3)
    assert np.isnan(grid.gaps[0, 0])


def test_gap_scan_rejects_empty_grid():
    with pytest.raises(ValueError):
        gap_scan(lambda j2: join_protocol(3, 1.0, j2), [], [0.0], K1_3)


# ------------------------------------------------------- manifold tracking

def test_manifold_split_vanishes():
    split = ground_manifold_tracking(join_protocol(5, 1.0, 0.3), np.linspace(0, 1, 11))
    assert split <= 1e-9


def test_manifold_split_xyz_parity():
    p = simultaneous_protocol(5, xyz_couplings(0.3), 0.0)
    split = ground_manifold_tracking(p, np.linspace(0, 1, 7))
    assert split <= 1e-9


def test_manifold_tracking_needs_odd_length():
    with pytest.raises(OddLengthRequired):
        ground_manifold_tracking(join_protocol(4, 1.0, 0.0), [0.0, 1.0])


# ------------------------------------------------------------- dimer state

def test_mg_dimer_energies():
    two = mg_dimer_state(2)
    op2 = build_sector_operator(
        j1j2_chain(2, 1.0, 0.0), enumerate_sector(SectorSpec.full(2))
    )
    assert abs(op2.expectation(two.amplitudes) + 3.0) < 1e-12

    for n in (4, 6):
        sv = mg_dimer_state(n)
        op = build_sector_operator(
            j1j2_chain(n, 1.0, 0.5), enumerate_sector(SectorSpec.full(n))
        )
        e = op.expectation(sv.amplitudes)
        assert abs(e + 1.5 * n) < 1e-10
        residual = np.linalg.norm(op.matvec(sv.amplitudes) - e * sv.amplitudes)
        assert residual < 1e-10


def test_mg_dimer_rejects_odd_length():
    with pytest.raises(EvenLengthRequired):
        mg_dimer_state(5)


# --------------------------------------------------------------- transport

def test_transport_z_qubit():
    p = simultaneous_protocol(5, 1.0, 0.2)
    r = transport_qubit(p, BlochVector(0, 0, 1), 60.0)
    assert r.qubit_fidelity >= 0.99
    assert np.allclose((r.bloch_out.x, r.bloch_out.y, r.bloch_out.z), (0, 0, 1), atol=0.01)


def test_transport_plus_state_phase_coherence():
    p = simultaneous_protocol(5, 1.0, 0.2)
    r = transport_qubit(p, BlochVector(1, 0, 0), 60.0)
    assert r.qubit_fidelity >= 0.98
    assert r.bloch_out.x > 0.97
    assert set(r.sector_fidelities) == {"k=2", "k=3"}


def test_transport_ising_fails():
    p = simultaneous_protocol(5, (0.0, 0.0, 1.0), (0.0, 0.0, 0.2))
    with pytest.warns(UserWarning):
        r = transport_qubit(p, BlochVector(1, 0, 0), 40.0)
    assert r.qubit_fidelity < 0.6


def test_transport_manifold_readout_for_join():
    p = join_protocol(5, 1.0, 0.2)
    rz = transport_qubit(p, BlochVector(0, 0, 1), 80.0)
    rx = transport_qubit(p, BlochVector(1, 0, 0), 80.0)
    assert rz.qubit_fidelity >= 0.99 and rx.qubit_fidelity >= 0.99
    assert rz.bloch_out.z > 0.99
    assert rx.bloch_out.x > 0.99


def test_transport_rejects_coupled_input():
    model = j1j2_chain(5, 1.0, 0.0)
    p = ProtocolSpec(n_spins=5, static_bonds=model.bonds, label="static")
    with pytest.raises(InputSiteCoupled):
        transport_qubit(p, BlochVector(0, 0, 1), 1.0)


def test_transport_two_sector_matches_full_space():
    p = simultaneous_protocol(5, 1.0, 0.2)
    for b in (BlochVector(0, 0, 1), BlochVector(1, 0, 0), BlochVector(0, -1, 0)):
        full = transport_qubit(p, b, 20.0)
        split = transport_qubit(p, b, 20.0, two_sector=True)
        assert abs(full.qubit_fidelity - split.qubit_fidelity) < 1e-9
        assert np.allclose(
            (full.bloch_out.x, full.bloch_out.y, full.bloch_out.z),
            (split.bloch_out.x, split.bloch_out.y, split.bloch_out.z),
            atol=1e-9,
        )
    # parity-conserving anisotropic couplings take the parity-block route
    px = simultaneous_protocol(5, xyz_couplings(0.4), 0.0)
    full = transport_qubit(px, BlochVector(1, 0, 0), 15.0)
    split = transport_qubit(px, BlochVector(1, 0, 0), 15.0, two_sector=True)
    assert abs(full.qubit_fidelity - split.qubit_fidelity) < 1e-9
