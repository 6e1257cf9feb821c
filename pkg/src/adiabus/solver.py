"""Sector-restricted sparse Hamiltonians, eigenpairs, and time evolution.

Matrix elements follow the Pauli convention (sigma eigenvalues +-1).  Per
bond (i, j):

* diagonal      jz * z_i * z_j
* anti-aligned  jx + jy   between states differing by a flip of opposite
                spins at i and j (conserves the up count)
* aligned       jx - jy   between states differing by a simultaneous flip
                of equal spins (changes the up count by two)

Every Hamiltonian in scope is real symmetric in the computational basis,
so operators are stored real and only states carry complex amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .basis import MAGNETIZATION, SectorBasis, SectorSpec, StateVector, enumerate_sector
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonConservingSector,
    NormDrift,
)
from .model import ChainModel, ProtocolSpec

_BREAKDOWN = 1e-13


def _pair_structure(basis: SectorBasis, i: int, j: int, with_double_flip: bool):
    """Per-(i,j) element structure on a sector basis.

    Returns (zz, flip_rows, flip_cols, dflip_rows, dflip_cols) where zz is
    the per-state z_i*z_j product and the index arrays address symmetric
    off-diagonal entries (both triangles included).
    """
    states = basis.states
    bi, bj = i - 1, j - 1
    zi = ((states >> bi) & 1) * 2 - 1
    zj = ((states >> bj) & 1) * 2 - 1
    zz = (zi * zj).astype(np.float64)
    mask = (1 << bi) | (1 << bj)

    rows = np.nonzero(zi != zj)[0]
    partners = states[rows] ^ mask
    cols = np.searchsorted(states, partners)
    # anti-aligned flips stay inside every supported sector kind
    drows = dcols = np.empty(0, dtype=np.int64)
    if with_double_flip:
        drows = np.nonzero(zi == zj)[0]
        dpartners = states[drows] ^ mask
        dcols = np.searchsorted(states, dpartners)
    return zz, rows, cols, drows, dcols


@dataclass(eq=False)
class SparseOperator:
    """Sector-restricted real symmetric Hamiltonian with cached diagonal."""

    basis: SectorBasis
    matrix: sp.csr_matrix
    diagonal: np.ndarray

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.dimension,):
            raise DimensionMismatch(
                f"vector length {v.shape} does not match dimension {self.dimension}"
            )
        return self.matrix @ v

    def expectation(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.matvec(v))))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_sector_operator(model: ChainModel, basis: SectorBasis) -> SparseOperator:
    """Assemble the sector block of a static chain Hamiltonian."""
    if basis.spec.n_spins != model.n_spins:
        raise DimensionMismatch("basis and model disagree on the number of spins")
    conserving = basis.spec.kind == MAGNETIZATION
    if conserving and not model.conserves_magnetization():
        raise NonConservingSector(
            "jx != jy does not conserve magnetization; use a parity or full basis"
        )
    dim = basis.dimension
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for b in model.bonds:
        zz, fr, fc, dr, dc = _pair_structure(
            basis, b.i, b.j, with_double_flip=(not conserving and b.jx != b.jy)
        )
        diag += b.jz * zz
        w = b.jx + b.jy
        if w != 0.0 and len(fr):
            rows.append(fr)
            cols.append(fc)
            vals.append(np.full(len(fr), w))
        wd = b.jx - b.jy
        if wd != 0.0 and len(dr):
            rows.append(dr)
            cols.append(dc)
            vals.append(np.full(len(dr), wd))
    if rows:
        off = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        ).tocsr()
    else:
        off = sp.csr_matrix((dim, dim))
    matrix = (off + sp.diags(diag)).tocsr()
    return SparseOperator(basis=basis, matrix=matrix, diagonal=diag)


@dataclass(eq=False)
class EigResult:
    """Lowest eigenpairs, ascending, with explicit residual norms."""

    eigenvalues: np.ndarray
    eigenvectors: list[StateVector]
    residuals: np.ndarray


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _lanczos_lowest(
    matvec,
    dim: int,
    tol: float,
    max_iter: int,
    locked: list[np.ndarray],
) -> tuple[float, np.ndarray, float]:
    """Lowest eigenpair in the orthogonal complement of ``locked``.

    Lanczos with full reorthogonalization, bookkeeping the complete
    projected matrix Q^T H Q so the basis may be widened by deterministic
    restart vectors (all-ones start, canonical vectors afterwards).  After
    the lowest Ritz pair converges, the space is widened once more and the
    pair is accepted only if no lower Ritz value emerges in a verification
    window.  This recovers eigenvalues whose eigenvectors are orthogonal to
    the start vector (exact symmetries of H) and, together with the outer
    deflation loop, degenerate multiplets.
    """
    horizon = min(dim, max_iter)
    q_store = np.zeros((dim, min(horizon, 64)))
    t_store = np.zeros((horizon, horizon))
    nq = 0
    inner_tol = 0.25 * tol

    def ensure_capacity():
        nonlocal q_store
        if nq >= q_store.shape[1]:
            grown = np.zeros((dim, min(horizon, 2 * q_store.shape[1])))
            grown[:, :nq] = q_store[:, :nq]
            q_store = grown

    def deflate(w):
        for lv in locked:
            w -= lv * (lv @ w)
        return w

    def orthogonalize(w):
        for _ in range(2):
            w = deflate(w)
            if nq:
                w -= q_store[:, :nq] @ (q_store[:, :nq].T @ w)
        return w

    def next_start(idx):
        # all-ones first, then canonical vectors ("indexed perturbation")
        while idx <= dim:
            if idx == 0:
                v = np.ones(dim) / math.sqrt(dim)
            else:
                v = np.zeros(dim)
                v[(idx - 1) % dim] = 1.0
            v = orthogonalize(v)
            nrm = float(np.linalg.norm(v))
            idx += 1
            if nrm > 1e-8:
                return v / nrm, idx
        return None, idx

    def ritz_lowest():
        evals, evecs = np.linalg.eigh(t_store[:nq, :nq])
        v = q_store[:, :nq] @ evecs[:, 0]
        v /= np.linalg.norm(v)
        theta = float(evals[0])
        res = float(np.linalg.norm(deflate(matvec(v)) - theta * v))
        return theta, v, res

    start_idx = 0
    q, start_idx = next_start(start_idx)
    if q is None:
        raise NoConvergence("no admissible start vector", iterations=0)

    best = None  # converged (theta, vector, residual)
    widen_mark = -1
    window = min(12, dim)
    while nq < horizon and nq < dim - len(locked):
        ensure_capacity()
        q_store[:, nq] = q
        nq += 1
        u = deflate(matvec(q))
        h = q_store[:, :nq].T @ u
        t_store[: nq, nq - 1] = h
        t_store[nq - 1, : nq] = h
        w = u - q_store[:, :nq] @ h
        w = orthogonalize(w)
        beta = float(np.linalg.norm(w))
        scale = max(np.max(np.abs(h)), beta, 1.0)
        breakdown = beta <= _BREAKDOWN * scale

        if breakdown or nq % 5 == 0 or nq >= dim - len(locked) or nq >= horizon:
            theta, v, res = ritz_lowest()
            genuinely_lower = best is None or theta < best[0] - inner_tol
            if genuinely_lower and res <= inner_tol:
                best = (theta, v, res)
                widen_mark = nq
                q, start_idx = next_start(start_idx)
                if q is None:
                    break
                continue
            if (
                not genuinely_lower
                and best is not None
                and widen_mark >= 0
                and nq - widen_mark >= window
            ):
                break
        if breakdown:
            q, start_idx = next_start(start_idx)
            if q is None:
                break
        else:
            q = w / beta

    # final sweep over the accumulated basis: if anything lower than the
    # accepted pair is still visible but unconverged, fail loudly rather
    # than return a wrong level
    theta, v, res = ritz_lowest()
    if best is None or theta < best[0] - inner_tol:
        best = (theta, v, res)
    if best[2] > tol:
        raise NoConvergence(
            f"Lanczos residual {best[2]:.3e} above tol {tol:.3e}", iterations=nq
        )
    return best


def lowest_eigenpairs(
    op: SparseOperator,
    m: int,
    tol: float = 1e-10,
    dense_cutoff: int = 512,
    max_iter: int = 500,
) -> EigResult:
    """The m algebraically smallest eigenpairs of a sector operator.

    Dense diagonalization below ``dense_cutoff``; otherwise deflated Lanczos
    with full reorthogonalization, locking one converged pair per sweep.
    """
    dim = op.dimension
    if not 1 <= m <= dim:
        raise DimensionMismatch(f"requested {m} pairs from dimension {dim}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if dim <= dense_cutoff:
        evals, evecs = np.linalg.eigh(op.to_dense())
        vs = [_fix_sign(np.ascontiguousarray(evecs[:, k])) for k in range(m)]
        residuals = np.array(
            [np.linalg.norm(op.matvec(v) - evals[k] * v) for k, v in enumerate(vs)]
        )
        return EigResult(
            eigenvalues=evals[:m].copy(),
            eigenvectors=[StateVector(op.basis, v.astype(np.complex128)) for v in vs],
            residuals=residuals,
        )

    locked: list[np.ndarray] = []
    values: list[float] = []
    for _ in range(m):
        theta, v, _ = _lanczos_lowest(op.matvec, dim, tol, max_iter, locked)
        locked.append(_fix_sign(v))
        values.append(theta)
    order = np.argsort(values, kind="stable")
    residuals = np.array(
        [np.linalg.norm(op.matvec(locked[k]) - values[k] * locked[k]) for k in order]
    )
    return EigResult(
        eigenvalues=np.array([values[k] for k in order]),
        eigenvectors=[
            StateVector(op.basis, locked[k].astype(np.complex128)) for k in order
        ],
        residuals=residuals,
    )


def sector_gap(model: ChainModel, spec: SectorSpec, tol: float = 1e-10) -> float:
    """E1 - E0 inside one sector; nonnegative up to twice the tolerance."""
    basis = enumerate_sector(spec)
    if basis.dimension < 2:
        raise DimensionMismatch("sector gap needs dimension >= 2")
    op = build_sector_operator(model, basis)
    res = lowest_eigenpairs(op, 2, tol)
    return float(res.eigenvalues[1] - res.eigenvalues[0])


@dataclass(frozen=True)
class PropagatorConfig:
    """Stepping controls for schedule evolution.

    ``step_count`` wins over ``dt``; with neither, the default policy is
    dt = min(0.05, tau/200), i.e. at least 200 steps and at most 0.05 per
    step.  ``step_tol`` bounds the per-step Krylov error estimate,
    ``refine_tol`` the successive-refinement infidelity accepted by
    convergence_refine.
    """

    step_count: int | None = None
    dt: float | None = None
    krylov_dim: int = 30
    step_tol: float = 1e-10
    refine_tol: float = 1e-8
    max_doublings: int = 10

    def __post_init__(self):
        if self.step_count is not None and self.step_count < 1:
            raise ValueError("step_count must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.krylov_dim < 2 or self.step_tol <= 0 or self.refine_tol <= 0:
            raise ValueError("propagator settings must be positive")

    def steps_for(self, tau: float) -> int:
        if self.step_count is not None:
            return self.step_count
        if tau <= 0.0:
            return 1
        dt = self.dt if self.dt is not None else min(0.05, tau / 200.0)
        return max(1, math.ceil(tau / dt - 1e-9))


class ScheduleOperator:
    """H(s) on a fixed sector basis with a frozen sparsity pattern.

    Construction precomputes the per-bond element structure once; assemble()
    then refreshes the CSR data and diagonal for a new schedule point in
    O(nnz), which keeps per-step cost dominated by matrix-vector products.
    """

    def __init__(self, protocol: ProtocolSpec, basis: SectorBasis):
        if basis.spec.n_spins != protocol.n_spins:
            raise DimensionMismatch("basis and protocol disagree on the number of spins")
        conserving = basis.spec.kind == MAGNETIZATION
        if conserving and not protocol.conserves_magnetization():
            raise NonConservingSector(
                "protocol couplings with jx != jy need a parity or full basis"
            )
        self.basis = basis
        self.protocol = protocol
        self.pairs = protocol.pairs()
        dim = basis.dimension
        self.dimension = dim

        anisotropic = not conserving
        zz_rows = []
        rows, cols, chan = [], [], []
        n_flip_channels = 0
        for idx, (i, j) in enumerate(self.pairs):
            zz, fr, fc, dr, dc = _pair_structure(basis, i, j, with_double_flip=anisotropic)
            zz_rows.append(zz)
            rows.append(fr)
            cols.append(fc)
            chan.append(np.full(len(fr), 2 * idx, dtype=np.int64))
            if anisotropic and len(dr):
                rows.append(dr)
                cols.append(dc)
                chan.append(np.full(len(dr), 2 * idx + 1, dtype=np.int64))
            n_flip_channels = 2 * (idx + 1)
        self._zz = np.array(zz_rows)  # (n_pairs, dim)
        self._n_channels = n_flip_channels

        r = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        c = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
        ch = np.concatenate(chan) if chan else np.empty(0, dtype=np.int64)
        pattern = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(dim, dim)).tocsr()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._csr = sp.csr_matrix(
            (np.zeros(pattern.nnz, dtype=np.complex128), pattern.indices, pattern.indptr),
            shape=(dim, dim),
        )
        # map every raw entry to its slot in the frozen pattern
        lookup = sp.csr_matrix(
            (np.arange(pattern.nnz, dtype=np.int64), pattern.indices, pattern.indptr),
            shape=(dim, dim),
        )
        self._slots = np.asarray(lookup[r, c]).ravel().astype(np.int64) if len(r) else r
        self._chan = ch
        self._diag = np.zeros(dim)
        self._s = None

    def coefficients(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """(jz per pair, flip-channel weights) at schedule point s."""
        coeffs = self.protocol.bond_coefficients(s)
        jz = np.zeros(len(self.pairs))
        flip = np.zeros(self._n_channels)
        for idx, pair in enumerate(self.pairs):
            trip = coeffs.get(pair)
            if trip is None:
                continue
            jx, jy, z = trip
            jz[idx] = z
            flip[2 * idx] = jx + jy
            flip[2 * idx + 1] = jx - jy
        return jz, flip

    def assemble(self, s: float) -> None:
        if self._s == s:
            return
        jz, flip = self.coefficients(s)
        self._diag = self._zz.T @ jz if len(self.pairs) else np.zeros(self.dimension)
        if len(self._slots):
            data = np.bincount(
                self._slots, weights=flip[self._chan], minlength=self._csr.nnz
            )
            self._csr.data.real[:] = data
        self._s = s

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._csr @ v + self._diag * v

    def static_operator(self, s: float) -> SparseOperator:
        from .model import evaluate_protocol

        return build_sector_operator(evaluate_protocol(self.protocol, s), self.basis)


def krylov_expm_apply(
    matvec,
    psi: np.ndarray,
    dt: float,
    tol: float = 1e-10,
    m_max: int = 30,
    _depth: int = 0,
) -> np.ndarray:
    """exp(-i dt H) psi for Hermitian H, via a Lanczos subspace.

    The subspace grows until the standard a-posteriori estimate
    beta * |last small-solution entry| falls below tol; a step whose
    estimate cannot meet tol within m_max dimensions is split in half
    (exact, since H is fixed within the step).
    """
    nrm = np.linalg.norm(psi)
    if nrm == 0.0 or dt == 0.0:
        return psi.copy()
    dim = len(psi)
    m_cap = min(m_max, dim)
    q_mat = np.zeros((dim, m_cap), dtype=np.complex128)
    alphas = np.zeros(m_cap)
    betas = np.zeros(m_cap)
    q_mat[:, 0] = psi / nrm
    scale = 1.0
    for j in range(m_cap):
        w = matvec(q_mat[:, j])
        alpha = float(np.real(np.vdot(q_mat[:, j], w)))
        alphas[j] = alpha
        w -= alpha * q_mat[:, j]
        if j > 0:
            w -= betas[j - 1] * q_mat[:, j - 1]
        coeff = q_mat[:, : j + 1].conj().T @ w
        w -= q_mat[:, : j + 1] @ coeff
        beta = float(np.linalg.norm(w))
        scale = max(scale, abs(alpha), beta)
        happy = beta <= _BREAKDOWN * scale
        if happy or j == m_cap - 1 or j >= 3:
            t = np.diag(alphas[: j + 1])
            if j > 0:
                t += np.diag(betas[:j], 1) + np.diag(betas[:j], -1)
            evals, evecs = np.linalg.eigh(t)
            u_small = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :].conj())
            err = beta * abs(u_small[-1]) * min(abs(dt), 1.0)
            if happy or err <= tol:
                return q_mat[:, : j + 1] @ (nrm * u_small)
        if j < m_cap - 1:
            betas[j] = beta
            q_mat[:, j + 1] = w / beta
    if _depth >= 40:
        raise NoConvergence("Krylov step refused to converge", iterations=_depth)
    half = krylov_expm_apply(matvec, psi, dt / 2.0, tol / 2.0, m_max, _depth + 1)
    return krylov_expm_apply(matvec, half, dt / 2.0, tol / 2.0, m_max, _depth + 1)


def evolve(
    protocol: ProtocolSpec,
    tau: float,
    sector: SectorSpec,
    psi0: StateVector,
    cfg: PropagatorConfig = PropagatorConfig(),
) -> StateVector:
    """Propagate psi0 through the schedule over physical time tau.

    Second-order midpoint stepping: each step applies the Krylov
    exponential of the Hamiltonian evaluated at the step midpoint.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if psi0.basis.spec != sector:
        raise DimensionMismatch("initial state basis does not match the sector")
    if abs(psi0.norm() - 1.0) > 1e-9:
        raise NormDrift(f"initial state norm {psi0.norm()} is not 1")
    if tau == 0.0:
        return StateVector(psi0.basis, psi0.amplitudes.copy())

    op = ScheduleOperator(protocol, psi0.basis)
    n = cfg.steps_for(tau)
    dt = tau / n
    psi = psi0.amplitudes.astype(np.complex128, copy=True)
    for k in range(n):
        s_mid = (k + 0.5) * dt / tau
        op.assemble(s_mid)
        psi = krylov_expm_apply(op.matvec, psi, dt, cfg.step_tol, cfg.krylov_dim)
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-6:
        raise NormDrift(f"norm drifted by {drift:.3e}; reduce the step size")
    psi /= np.linalg.norm(psi)
    return StateVector(psi0.basis, psi)


def convergence_refine(
    protocol: ProtocolSpec,
    tau: float,
    sector: SectorSpec,
    psi0: StateVector,
    cfg: PropagatorConfig = PropagatorConfig(),
) -> StateVector:
    """Double the step count until successive results agree in fidelity."""
    n = cfg.steps_for(tau)
    prev = evolve(protocol, tau, sector, psi0, replace(cfg, step_count=n))
    for _ in range(cfg.max_doublings):
        n *= 2
        cur = evolve(protocol, tau, sector, psi0, replace(cfg, step_count=n))
        overlap = abs(np.vdot(prev.amplitudes, cur.amplitudes))
        if overlap >= 1.0 - cfg.refine_tol:
            return cur
        prev = cur
    raise NoConvergence(
        f"step doubling cap {cfg.max_doublings} reached", iterations=cfg.max_doublings
    )
