"""Seeded random generators shared by the test modules."""

import numpy as np


def rng(seed):
    return np.random.default_rng(seed)


def random_unitary(r, m):
    """Haar-ish unitary via QR of a complex Gaussian with phase fix."""
    z = r.standard_normal((m, m)) + 1j * r.standard_normal((m, m))
    q, rr = np.linalg.qr(z)
    return q * (np.diag(rr) / np.abs(np.diag(rr)))


def random_hermitian(r, m, scale=1.0):
    z = r.standard_normal((m, m)) + 1j * r.standard_normal((m, m))
    return scale * 0.5 * (z + z.conj().T)


def random_projector(r, m, rank):
    u = random_unitary(r, m)
    return u[:, :rank] @ u[:, :rank].conj().T


def projector_pair_at_distance(r, m, rank, distance):
    """Projector pair with operator distance scaled to the requested value."""
    p = random_projector(r, m, rank)
    for _ in range(60):
        h = random_hermitian(r, m, scale=0.2)
        u = np.linalg.matrix_power(np.eye(m), 1)  # identity placeholder
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(1j * w)) @ v.conj().T
        q = u @ p @ u.conj().T
        d = np.linalg.norm(p - q, 2)
        if d > 1e-3:
            break
    # rescale the generator until the distance lands near the target
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        u = _expm_scaled(h, mid)
        q = u @ p @ u.conj().T
        d = np.linalg.norm(p - q, 2)
        if d < distance:
            lo = mid
        else:
            hi = mid
    u = _expm_scaled(h, lo)
    q = u @ p @ u.conj().T
    return p, q


def _expm_scaled(h, s):
    w, v = np.linalg.eigh(s * h)
    return (v * np.exp(1j * w)) @ v.conj().T


def canonical_j(n):
    """Block matrix [[0, -Id], [Id, 0]] of size 2n."""
    j = np.zeros((2 * n, 2 * n), dtype=complex)
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


def random_j_transpose_symmetric_unitary(r, n):
    """Unitary u with J u^T J^{-1} = u (the matching-matrix symmetry class)."""
    j = canonical_j(n)
    x = random_hermitian(r, 2 * n)
    # enforce J x^T J^{-1} = x, i.e. x = -J x^T J
    x = 0.5 * (x + j @ x.T @ j.conj().T)
    w, v = np.linalg.eigh(x)
    return (v * np.exp(1j * w)) @ v.conj().T, j, x


def random_symplectic_unitary(r, n):
    """Element of Sp(2n) seen in U(2n): exp(iL) with (JL)^T = JL."""
    j = canonical_j(n)
    x = random_hermitian(r, 2 * n)
    x = 0.5 * (x + j @ x.T @ j)  # (JL)^T = JL  <=>  J L^T J = L
    w, v = np.linalg.eigh(x)
    return (v * np.exp(1j * w)) @ v.conj().T, j, x


def smooth_phase_loop(r, n_samples, winding, n_harmonics=3, amp=0.4):
    """exp(i(w*k + trig polynomial)) sampled on the standard grid."""
    k = -np.pi + 2.0 * np.pi * np.arange(n_samples) / n_samples
    phase = winding * k.astype(float)
    for m in range(1, n_harmonics + 1):
        a, b = amp * r.standard_normal(2) / m
        phase = phase + a * np.sin(m * k) + b * (np.cos(m * k) - 1.0)
    return np.exp(1j * phase)


def smooth_unitary_loop(r, n_samples, m, det_winding=0, amp=0.3):
    """Random smooth unitary loop with prescribed determinant winding."""
    k = -np.pi + 2.0 * np.pi * np.arange(n_samples) / n_samples
    h0 = random_hermitian(r, m, scale=amp)
    h1 = random_hermitian(r, m, scale=amp)
    h2 = random_hermitian(r, m, scale=amp)
    samples = np.empty((n_samples, m, m), dtype=complex)
    for j, kj in enumerate(k):
        h = np.cos(kj) * h0 + np.sin(kj) * h1 + np.cos(2 * kj) * h2
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(1j * w)) @ v.conj().T
        u = u.copy()
        u[0, :] = u[0, :] * np.exp(1j * det_winding * kj)
        samples[j] = u
    return samples
