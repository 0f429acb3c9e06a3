"""Fermionic time-reversal structures and projector fields on the 2-torus.

The antiunitary symmetry is stored as T = (entrywise conjugation) followed
by left multiplication with a unitary J obeying J conj(J) = -Id, so that
T^2 = -Id. On every quaternionic basis produced here T acts in coordinates
as c -> J_c conj(c) with the canonical

    J_c = [[0, -Id_n], [Id_n, 0]].

All sign-sensitive relations downstream (matching-matrix symmetry, gluing
constraints, Kramers pairing of frames) are derived once under this single
convention; see docs/conventions.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import linalg
from .errors import (
    InvalidInput,
    NotInvariant,
    OddQuaternionicDimension,
    RefinementNeeded,
)

IDEMPOTENCY_TOL = 1e-10
HERMITICITY_TOL = 1e-10
RANK_TOL = 1e-8
PERIODICITY_TOL = 1e-10
TRS_TOL = 1e-8


def canonical_j(n: int) -> np.ndarray:
    """The fixed coordinate representation [[0, -Id_n], [Id_n, 0]]."""
    j = np.zeros((2 * n, 2 * n), dtype=complex)
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


@dataclass(frozen=True)
class TRSStructure:
    """Antiunitary T = J . conj with T^2 = -Id on C^D (D even)."""

    j: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=complex)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise InvalidInput("J must be square")
        if j.shape[0] % 2 != 0:
            raise InvalidInput("fermionic time reversal needs even dimension")
        linalg.require_finite(j, "J")
        if linalg.unitarity_defect(j) > 1e-12:
            raise InvalidInput("J must be unitary within 1e-12")
        if linalg.op_norm(j @ j.conj() + np.eye(j.shape[0])) > 1e-12:
            raise InvalidInput("J conj(J) = -Id violated (T^2 != -Id)")
        object.__setattr__(self, "j", j)

    @property
    def dim(self) -> int:
        return self.j.shape[0]

    @classmethod
    def canonical(cls, n: int) -> "TRSStructure":
        return cls(canonical_j(n))

    def apply(self, v) -> np.ndarray:
        """T v = J conj(v); acts columnwise on matrices."""
        return self.j @ np.conj(v)

    def conjugate(self, x) -> np.ndarray:
        """T X T^{-1} = J conj(X) J^dagger for a linear operator X."""
        return self.j @ np.conj(x) @ self.j.conj().T


@dataclass(frozen=True)
class Grid2:
    """Even torus grid with nodes -pi + 2*pi*j/N on each axis.

    The node set (mod 2*pi) is closed under k -> -k and contains the four
    time-reversal invariant points; (pi, .) coincides with the stored
    (-pi, .) row. Axis 1 is the transport direction t, axis 2 is k2.
    """

    n1: int
    n2: int

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n <= 0 or n % 2 != 0:
                raise InvalidInput("grid sizes must be even positive integers")

    @property
    def nodes1(self) -> np.ndarray:
        return linalg.grid_nodes(self.n1)

    @property
    def nodes2(self) -> np.ndarray:
        return linalg.grid_nodes(self.n2)

    def refined(self, axis=None) -> "Grid2":
        if axis == "t":
            return Grid2(2 * self.n1, self.n2)
        if axis == "k2":
            return Grid2(self.n1, 2 * self.n2)
        return Grid2(2 * self.n1, 2 * self.n2)

    @staticmethod
    def negate_index(j: int, n: int) -> int:
        return (-j) % n


class ProjectionField:
    """Evaluator k -> rank-r orthogonal projector on C^D over the 2-torus.

    Evaluations are memoized per exact node, which keeps repeated pipeline
    passes (validation, transport, matching) from re-diagonalizing models.
    Evaluators must be pure; concurrent evaluation at distinct k is safe.
    """

    def __init__(self, dim, rank, evaluator, trs=None, provenance="unspecified"):
        if rank <= 0 or rank > dim:
            raise InvalidInput("rank must lie in 1..dim")
        if trs is not None:
            if trs.dim != dim:
                raise InvalidInput("TRS dimension mismatch")
            if rank % 2 != 0:
                raise InvalidInput("time-reversal symmetric fields have even rank")
        self.dim = int(dim)
        self.rank = int(rank)
        self.trs = trs
        self.provenance = str(provenance)
        self._evaluator = evaluator
        self._cache = {}

    def at(self, k1: float, k2: float) -> np.ndarray:
        key = (float(k1), float(k2))
        hit = self._cache.get(key)
        if hit is None:
            hit = np.asarray(self._evaluator(key[0], key[1]), dtype=complex)
            if hit.shape != (self.dim, self.dim):
                raise InvalidInput("evaluator returned a wrong-shaped matrix")
            self._cache[key] = hit
        return hit

    def __call__(self, k1, k2):
        return self.at(k1, k2)

    def sample_grid(self, grid: Grid2) -> np.ndarray:
        out = np.empty((grid.n1, grid.n2, self.dim, self.dim), dtype=complex)
        for i, k1 in enumerate(grid.nodes1):
            for j, k2 in enumerate(grid.nodes2):
                out[i, j] = self.at(k1, k2)
        return out


def constant_field(projector, trs=None, provenance="constant") -> ProjectionField:
    p = np.asarray(projector, dtype=complex)
    rank = int(round(np.trace(p).real))
    return ProjectionField(p.shape[0], rank, lambda k1, k2: p, trs=trs, provenance=provenance)


def direct_sum_fields(a: ProjectionField, b: ProjectionField) -> ProjectionField:
    """Block direct sum; carries a TRS structure iff both summands do."""
    trs = None
    if a.trs is not None and b.trs is not None:
        j = np.zeros((a.dim + b.dim, a.dim + b.dim), dtype=complex)
        j[: a.dim, : a.dim] = a.trs.j
        j[a.dim :, a.dim :] = b.trs.j
        trs = TRSStructure(j)

    def evaluator(k1, k2):
        out = np.zeros((a.dim + b.dim, a.dim + b.dim), dtype=complex)
        out[: a.dim, : a.dim] = a.at(k1, k2)
        out[a.dim :, a.dim :] = b.at(k1, k2)
        return out

    return ProjectionField(
        a.dim + b.dim,
        a.rank + b.rank,
        evaluator,
        trs=trs,
        provenance=f"({a.provenance}) (+) ({b.provenance})",
    )


class SampledProjectionField(ProjectionField):
    """Field backed by grid samples, evaluated by bilinear spectral retraction.

    Between nodes the Hermitian bilinear interpolant is retracted onto the
    rank-r projector manifold through its top-r eigenprojection; adjacent
    samples must stay within operator distance 0.4 so the retraction gap
    stays open. Exact node queries return the stored samples.
    """

    def __init__(self, samples, rank, trs=None, provenance="sampled"):
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 4 or samples.shape[2] != samples.shape[3]:
            raise InvalidInput("samples must have shape (N1, N2, D, D)")
        n1, n2, dim, _ = samples.shape
        step1 = _max_adjacent_distance(samples, axis=0)
        step2 = _max_adjacent_distance(samples, axis=1)
        if max(step1, step2) > 0.4:
            raise RefinementNeeded(
                f"sample grid too coarse for retraction: step {max(step1, step2):.3f}",
                axis="t" if step1 >= step2 else "k2",
            )
        self._samples = samples
        self._n1, self._n2 = n1, n2
        super().__init__(dim, rank, self._interpolate, trs=trs, provenance=provenance)

    @property
    def samples(self):
        return self._samples

    def _interpolate(self, k1, k2):
        i0, tx = _locate(k1, self._n1)
        j0, ty = _locate(k2, self._n2)
        if tx == 0.0 and ty == 0.0:
            return self._samples[i0, j0]
        i1 = (i0 + 1) % self._n1
        j1 = (j0 + 1) % self._n2
        x = (
            (1 - tx) * (1 - ty) * self._samples[i0, j0]
            + tx * (1 - ty) * self._samples[i1, j0]
            + (1 - tx) * ty * self._samples[i0, j1]
            + tx * ty * self._samples[i1, j1]
        )
        x = 0.5 * (x + x.conj().T)
        w, v = np.linalg.eigh(x)
        if w[self.dim - self.rank] - w[self.dim - self.rank - 1] < 0.1:
            raise InvalidInput("retraction gap closed; samples too coarse")
        occ = v[:, self.dim - self.rank :]
        return occ @ occ.conj().T


def _locate(k, n):
    h = 2.0 * np.pi / n
    x = (k + np.pi) / h
    x = x - n * np.floor(x / n)
    i0 = int(np.floor(x))
    if i0 >= n:
        i0 -= n
    frac = x - i0
    if frac < 1e-12:
        frac = 0.0
    elif frac > 1.0 - 1e-12:
        frac = 0.0
        i0 = (i0 + 1) % n
    return i0, frac


def _max_adjacent_distance(samples, axis):
    diff = np.roll(samples, -1, axis=axis) - samples
    return float(np.linalg.svd(diff, compute_uv=False)[..., 0].max())


@dataclass
class QuaternionicBasis:
    """Orthonormal basis (u_1..u_n, T u_1..T u_n) of a T-invariant subspace."""

    matrix: np.ndarray  # (D, 2n) columns
    n: int
    gram_residual: float
    span_residual: float
    j_representation_residual: float

    @property
    def j_rep(self) -> np.ndarray:
        return canonical_j(self.n)


def quaternionic_basis(columns, trs: TRSStructure, invariance_tol=TRS_TOL) -> QuaternionicBasis:
    """Extract Kramers-paired orthonormal vectors spanning a T-invariant space.

    Deterministic greedy selection: repeatedly project the input columns
    onto the uncovered remainder, take the largest-residual direction,
    orthogonalize it against the accumulated pairs and adjoin its T-partner.
    Orthogonality of partners is automatic from T^2 = -Id.
    """
    v = np.asarray(columns, dtype=complex)
    if v.ndim != 2:
        raise InvalidInput("spanning set must be a matrix of columns")
    dim, width = v.shape
    if width % 2 != 0:
        raise OddQuaternionicDimension(
            f"quaternionic bases need even dimension, got {width}"
        )
    if linalg.op_norm(v.conj().T @ v - np.eye(width)) > 1e-8:
        raise InvalidInput("spanning columns must be orthonormal")
    pi = v @ v.conj().T
    inv_res = linalg.op_norm(trs.conjugate(pi) - pi)
    if inv_res > invariance_tol:
        raise NotInvariant(f"span is not T-invariant: residual {inv_res:.3e}")

    n = width // 2
    us = []
    accumulated = np.zeros((dim, 0), dtype=complex)
    for _ in range(n):
        residual = pi - accumulated @ accumulated.conj().T
        cand = residual @ v
        norms = np.linalg.norm(cand, axis=0)
        best = int(np.argmax(norms))
        if norms[best] < 1e-8:
            raise InvalidInput("greedy pair extraction ran out of directions")
        u = cand[:, best] / norms[best]
        for _ in range(3):
            u = u - accumulated @ (accumulated.conj().T @ u)
            u = u / np.linalg.norm(u)
        tu = trs.apply(u)
        us.append(u)
        accumulated = np.concatenate([accumulated, u[:, None], tu[:, None]], axis=1)

    b = np.concatenate(
        [np.stack(us, axis=1), np.stack([trs.apply(u) for u in us], axis=1)], axis=1
    )
    gram = linalg.op_norm(b.conj().T @ b - np.eye(width))
    span = linalg.op_norm(b @ b.conj().T - pi)
    jrep = linalg.op_norm(b.conj().T @ trs.apply(b) - canonical_j(n))
    if gram > 1e-10:
        raise InvalidInput(f"extracted basis lost orthonormality: {gram:.3e}")
    return QuaternionicBasis(b, n, gram, span, jrep)


@dataclass
class ValidationReport:
    """Residual audit of a ProjectionField over a grid."""

    residuals: dict
    worst_points: dict
    thresholds: dict
    checked_trs: bool

    @property
    def passed(self) -> bool:
        return all(
            self.residuals[name] <= self.thresholds[name] for name in self.residuals
        )

    def failures(self):
        return {
            name: (self.residuals[name], self.thresholds[name])
            for name in self.residuals
            if self.residuals[name] > self.thresholds[name]
        }


def validate_field(field: ProjectionField, grid: Grid2) -> ValidationReport:
    """Audit idempotency, hermiticity, rank, periodicity and TRS residuals.

    Side-effect free and idempotent; failures are reported, never raised.
    """
    nodes1, nodes2 = grid.nodes1, grid.nodes2
    names = ["idempotency", "hermiticity", "rank", "periodicity"]
    residuals = {name: 0.0 for name in names}
    worst = {name: (0.0, 0.0) for name in names}
    eye_like = None

    samples = field.sample_grid(grid)
    for i, k1 in enumerate(nodes1):
        for j, k2 in enumerate(nodes2):
            p = samples[i, j]
            r_idem = linalg.op_norm(p @ p - p)
            r_herm = linalg.hermiticity_defect(p)
            r_rank = abs(np.trace(p).real - field.rank)
            for name, val in (
                ("idempotency", r_idem),
                ("hermiticity", r_herm),
                ("rank", r_rank),
            ):
                if val > residuals[name]:
                    residuals[name] = val
                    worst[name] = (k1, k2)

    # periodicity along both axes on the grid edges
    for j, k2 in enumerate(nodes2):
        val = linalg.op_norm(field.at(nodes1[0] + 2.0 * np.pi, k2) - samples[0, j])
        if val > residuals["periodicity"]:
            residuals["periodicity"] = val
            worst["periodicity"] = (nodes1[0], k2)
    for i, k1 in enumerate(nodes1):
        val = linalg.op_norm(field.at(k1, nodes2[0] + 2.0 * np.pi) - samples[i, 0])
        if val > residuals["periodicity"]:
            residuals["periodicity"] = val
            worst["periodicity"] = (k1, nodes2[0])

    thresholds = {
        "idempotency": IDEMPOTENCY_TOL,
        "hermiticity": HERMITICITY_TOL,
        "rank": RANK_TOL,
        "periodicity": PERIODICITY_TOL,
    }

    checked_trs = field.trs is not None
    if checked_trs:
        residuals["trs"] = 0.0
        worst["trs"] = (0.0, 0.0)
        thresholds["trs"] = TRS_TOL
        for i, k1 in enumerate(nodes1):
            for j, k2 in enumerate(nodes2):
                i_neg = Grid2.negate_index(i, grid.n1)
                j_neg = Grid2.negate_index(j, grid.n2)
                val = linalg.op_norm(
                    field.trs.conjugate(samples[i, j]) - samples[i_neg, j_neg]
                )
                if val > residuals["trs"]:
                    residuals["trs"] = val
                    worst["trs"] = (k1, k2)

    return ValidationReport(residuals, worst, thresholds, checked_trs)


def trs_conjugate_field(field: ProjectionField, trs: TRSStructure) -> ProjectionField:
    """The field k -> T P(-k) T^{-1}; an involution up to 1e-12."""
    if trs.dim != field.dim:
        raise InvalidInput("TRS dimension mismatch")

    def evaluator(k1, k2):
        return trs.conjugate(field.at(-k1, -k2))

    return ProjectionField(
        field.dim,
        field.rank,
        evaluator,
        trs=field.trs,
        provenance=f"T-conjugate of ({field.provenance})",
    )
