"""Layered interferometer model.

The device transfer matrix is

    U = Phi_{L+1} U_L Phi_L ... Phi_2 U_1 Phi_1,

with fixed mixing ("basis") unitaries U_l and diagonal phase layers
Phi_l = diag(exp(i phi_l1), ..., exp(i phi_lN)). Phase layers are applied as
row/column scalings, never as dense products.

Phase schedules are real arrays of shape (L+1, N); row l-1 holds the phases
of Phi_l. Every routine also accepts a stack of schedules with shape
(B, L+1, N) and then returns stacked results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import TOL_UNITARY, Rng, ShapeError, haar_random_unitary, unitarity_error


@dataclass(frozen=True)
class MeshModel:
    """Ordered basis matrices U_1..U_L, stored as an (L, N, N) array."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=np.complex128)
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] < 1 or b.shape[1] < 1:
            raise ShapeError(f"basis must have shape (L, N, N), got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("basis has non-finite entries")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def n_modes(self) -> int:
        return self.basis.shape[1]

    @property
    def n_mixers(self) -> int:
        return self.basis.shape[0]

    @property
    def phase_shape(self) -> tuple[int, int]:
        return (self.n_mixers + 1, self.n_modes)

    def max_unitarity_error(self) -> float:
        return max(unitarity_error(u) for u in self.basis)

    def is_unitary(self, tol: float = TOL_UNITARY) -> bool:
        return self.max_unitarity_error() <= tol

    @classmethod
    def haar(cls, n: int, n_mixers: int | None, rng: Rng) -> "MeshModel":
        L = n if n_mixers is None else n_mixers
        if L < 1:
            raise ShapeError(f"number of mixing layers must be positive, got {L}")
        return cls(np.stack([haar_random_unitary(n, rng) for _ in range(L)]))


def wrap_phases(phases) -> np.ndarray:
    """Map phases into [0, 2*pi)."""
    w = np.mod(np.asarray(phases, dtype=float), 2 * np.pi)
    # mod can round up to exactly 2*pi for tiny negative inputs
    w[w >= 2 * np.pi] = 0.0
    return w


def _check_phases(model: MeshModel, phases) -> np.ndarray:
    p = np.asarray(phases, dtype=float)
    if p.shape[-2:] != model.phase_shape or p.ndim not in (2, 3):
        raise ShapeError(
            f"phases must have shape {model.phase_shape} or (B, *{model.phase_shape}), got {p.shape}"
        )
    if not np.all(np.isfinite(p)):
        raise ValueError("phases have non-finite entries")
    return p


def _stacked(model, phases):
    p = _check_phases(model, phases)
    single = p.ndim == 2
    if single:
        p = p[None]
    return p, np.exp(1j * p), single


def _unstack(x, single):
    return x[0] if single else x


def forward(model: MeshModel, phases) -> np.ndarray:
    """Transfer matrix for one schedule (N, N) or a stack (B, N, N)."""
    p, e, single = _stacked(model, phases)
    # Phi_1 as a column scaling of U_1, then alternate row scalings / products
    u = e[:, 1, :, None] * model.basis[0] * e[:, 0, None, :]
    for l in range(1, model.n_mixers):
        u = e[:, l + 1, :, None] * (model.basis[l] @ u)
    return _unstack(u, single)


def chain_cd(model: MeshModel, phases):
    """Partial products with U = C_l Phi_l D_l for l = 1..L+1.

    Returns arrays C, D of shape (L+1, N, N) (or (B, L+1, N, N) for stacked
    input); index l-1 holds C_l, D_l.
    """
    p, e, single = _stacked(model, phases)
    C, D = _chain_cd(model.basis, e)
    return _unstack(C, single), _unstack(D, single)


def _chain_cd(basis, e):
    B, L1, N = e.shape
    L = L1 - 1
    eye = np.eye(N, dtype=np.complex128)
    C = np.empty((B, L1, N, N), dtype=np.complex128)
    D = np.empty((B, L1, N, N), dtype=np.complex128)
    D[:, 0] = eye
    for l in range(1, L1):
        # D_{l+1} = U_l Phi_l D_l
        D[:, l] = basis[l - 1] @ (e[:, l - 1, :, None] * D[:, l - 1])
    C[:, L] = eye
    for l in range(L - 1, -1, -1):
        # C_l = C_{l+1} Phi_{l+1} U_l
        C[:, l] = (C[:, l + 1] * e[:, l + 1, None, :]) @ basis[l]
    return C, D


def chain_ab(model: MeshModel, phases):
    """Partial products with U = A_l U_l B_l for l = 1..L.

    Returns arrays A, B of shape (L, N, N) (or (B, L, N, N)); index l-1 holds
    A_l, B_l. Uses A_l = C_{l+1} Phi_{l+1} and B_l = Phi_l D_l.
    """
    p, e, single = _stacked(model, phases)
    C, D = _chain_cd(model.basis, e)
    A, Bm = _ab_from_cd(C, D, e)
    return _unstack(A, single), _unstack(Bm, single)


def _ab_from_cd(C, D, e):
    A = C[:, 1:] * e[:, 1:, None, :]
    Bm = e[:, :-1, :, None] * D[:, :-1]
    return A, Bm


def _residual(model, p, e, target):
    target = np.asarray(target, dtype=np.complex128)
    if target.ndim == 2:
        target = target[None]
    N = model.n_modes
    if target.shape[-2:] != (N, N) or target.shape[0] not in (1, p.shape[0]):
        raise ShapeError(f"target shape {target.shape} does not match model with N={N}")
    C, D = _chain_cd(model.basis, e)
    # U = C_1 Phi_1 D_1 = C_1 Phi_1
    u = C[:, 0] * e[:, 0, None, :]
    return u - target, C, D


def grad_basis(model: MeshModel, phases, target) -> np.ndarray:
    """Gradient of J_FR(forward(model, phases), target) w.r.t. basis entries.

    Returns complex G of shape (L, N, N) (or (B, L, N, N) for stacked
    phases) such that dJ/dRe(u_ij^(l)) = Re G[l-1, i, j] and
    dJ/dIm(u_ij^(l)) = Im G[l-1, i, j]. Contracted form
    G_l = (2/N) A_l^H E B_l^H with residual E = U - target.
    """
    p, e, single = _stacked(model, phases)
    E, C, D = _residual(model, p, e, target)
    A, Bm = _ab_from_cd(C, D, e)
    G = (2.0 / model.n_modes) * (np.conj(np.swapaxes(A, -1, -2)) @ E[:, None] @ np.conj(np.swapaxes(Bm, -1, -2)))
    return _unstack(G, single)


def grad_phases(model: MeshModel, phases, target) -> np.ndarray:
    """Gradient of J_FR w.r.t. every phase, shape (L+1, N) (or stacked).

    dU/dphi_lk = i exp(i phi_lk) C_l[:, k] D_l[k, :], so
    dJ/dphi_lk = (2/N) Re(i exp(i phi_lk) conj((C_l^H E D_l^H)_kk)).
    """
    p, e, single = _stacked(model, phases)
    E, C, D = _residual(model, p, e, target)
    # (C^H E D^H)_kk = sum_ij conj(C_ik) E_ij conj(D_kj)
    ED = E[:, None] @ np.conj(np.swapaxes(D, -1, -2))
    diag = np.einsum("blik,blik->blk", np.conj(C), ED)
    g = (2.0 / model.n_modes) * np.real(1j * e * np.conj(diag))
    return _unstack(g, single)


def batch_objective(model: MeshModel, phases, targets):
    """Mean J_FR over a stack of schedules and targets, with its basis gradient.

    Returns ``(J_mean, G)`` with G the complex (L, N, N) gradient of the mean.
    """
    p, e, _ = _stacked(model, phases)
    targets = np.asarray(targets, dtype=np.complex128)
    if targets.shape != (p.shape[0], model.n_modes, model.n_modes):
        raise ShapeError(f"targets shape {targets.shape} does not match phases {p.shape}")
    return mean_objective(model.basis, e, targets)


def mean_objective(basis, e, targets):
    """Unchecked core of :func:`batch_objective`.

    ``e`` holds the phase factors exp(i phi) with shape (B, L+1, N).
    """
    C, D = _chain_cd(basis, e)
    E = C[:, 0] * e[:, 0, None, :] - targets
    nb, N = E.shape[0], E.shape[-1]
    j = np.sum(E.real ** 2 + E.imag ** 2) / (N * nb)
    A, Bm = _ab_from_cd(C, D, e)
    G = np.conj(np.swapaxes(A, -1, -2)) @ E[:, None] @ np.conj(np.swapaxes(Bm, -1, -2))
    G = (2.0 / (N * nb)) * G.sum(axis=0)
    return float(j), G


def batch_distance(model: MeshModel, phases, targets) -> np.ndarray:
    """Per-schedule J_FR between model predictions and targets."""
    u = forward(model, phases)
    if u.ndim == 2:
        u = u[None]
    t = np.asarray(targets, dtype=np.complex128).reshape(u.shape)
    e = u - t
    return np.sum(e.real ** 2 + e.imag ** 2, axis=(-2, -1)) / model.n_modes
