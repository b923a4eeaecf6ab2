"""Dense complex linear algebra helpers shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. A "unitary"
is any square array passing :func:`check_unitary` at ``TOL_UNITARY``.
"""

from __future__ import annotations

import numpy as np

TOL_UNITARY = 1e-10
RANK_RTOL = 1e-12


class ShapeError(ValueError):
    """Array dimensions do not agree with what the operation expects."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be full rank is (numerically) rank deficient."""


class Rng:
    """Seedable random stream.

    Uniform variates come from PCG64, whose output is fixed by the seed on
    every platform. Normal variates are produced from those uniforms with the
    Box-Muller transform so that the full sample stream is pinned down by
    the seed alone, independent of numpy's internal normal sampler.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low=0.0, high=1.0, size=None):
        return low + (high - low) * self._gen.random(size)

    def normal(self, size=None) -> np.ndarray:
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        k = (n + 1) // 2
        # 1 - u keeps the argument of log in (0, 1]
        u1 = 1.0 - self._gen.random(k)
        u2 = self._gen.random(k)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
        if size is None:
            return z[0]
        return z.reshape(shape)

    def complex_normal(self, size) -> np.ndarray:
        """Standard complex Gaussian, E|z|^2 = 1."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        z = self.normal((2,) + shape)
        return (z[0] + 1j * z[1]) / np.sqrt(2.0)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size)

    def phases(self, shape) -> np.ndarray:
        """I.i.d. phases uniform on [0, 2*pi)."""
        return self.uniform(0.0, 2 * np.pi, shape)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ShapeError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def unitarity_error(u) -> float:
    """Frobenius norm of U^dagger U - I."""
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def is_unitary(u, tol: float = TOL_UNITARY) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and unitarity_error(u) <= tol


def check_unitary(u, tol: float = TOL_UNITARY, name="matrix") -> np.ndarray:
    u = as_square(u, name)
    err = unitarity_error(u)
    if err > tol:
        raise ValueError(f"{name} is not unitary: ||U^H U - I||_F = {err:.3e} > {tol:.1e}")
    return u


def haar_random_unitary(n: int, rng: Rng) -> np.ndarray:
    """Haar-distributed n x n unitary.

    QR of a complex Ginibre matrix, with each column of Q rotated by the
    phase of the matching diagonal entry of R (Mezzadri's correction; plain
    QR output is not Haar distributed).
    """
    if int(n) != n or n < 1:
        raise ShapeError(f"dimension must be a positive integer, got {n}")
    z = rng.complex_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def polar_unitary_factor(a) -> np.ndarray:
    """Unitary factor V of the polar decomposition A = H V.

    Computed from the SVD A = W S Z^H as V = W Z^H; this is also the unitary
    closest to A in Frobenius norm. Rank-deficient input is rejected rather
    than completed arbitrarily.
    """
    a = as_square(a)
    w, s, zh = np.linalg.svd(a)
    if s[-1] <= RANK_RTOL * s[0]:
        raise SingularMatrixError(
            f"matrix is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3e})"
        )
    return w @ zh


def _same_square(u, v):
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape != v.shape:
        raise ShapeError(f"expected two square matrices of equal size, got {u.shape} and {v.shape}")
    return u, v


def frobenius_distance(u, v) -> float:
    """J_FR = (1/N) * sum_ij |u_ij - v_ij|^2."""
    u, v = _same_square(u, v)
    e = u - v
    return float(np.sum(e.real ** 2 + e.imag ** 2) / u.shape[0])


def fidelity(u, v) -> float:
    """(1/N^2) |Tr(V^H U)|^2; insensitive to a global phase."""
    u, v = _same_square(u, v)
    n = u.shape[0]
    # Tr(V^H U) = sum_ij conj(v_ij) u_ij
    tr = np.vdot(v, u)
    return float(abs(tr) ** 2 / n ** 2)


def perturb_unitary(u, alpha: float, rng: Rng) -> np.ndarray:
    """Unitary factor of U + alpha (X + iY), X and Y standard normal."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    u = as_square(u)
    n = u.shape[0]
    x = rng.normal((n, n))
    y = rng.normal((n, n))
    return polar_unitary_factor(u + alpha * (x + 1j * y))
