"""Pointwise algebra of curvature-type tensors on R^n.

A curvature-type tensor is stored as a dense ``(n, n, n, n)`` array with the
symmetries ``R_ijkl = -R_jikl = -R_ijlk = R_klij``.  Writes always go through
:func:`symmetrize`, which fills every entry from a canonical generating set so
that these symmetries hold bit-for-bit.

The pair view indexes two-forms by ``(i, j)`` with ``i < j``.  In the orthonormal
basis ``E_ij = e_i e_j^T - e_j e_i^T`` of so(n) (inner product ``tr(X^T Y) / 2``)
the pair matrix ``M[(ij), (kl)] = R_ijkl`` is the matrix of R as a symmetric
operator on two-forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

MIN_DIM = 4
MAX_DIM = 32
BIANCHI_RTOL = 1e-9


class DimensionError(ValueError):
    """Raised when tensor dimensions are invalid or do not match."""


class Mode(str, Enum):
    PIC = "PIC"
    PIC1 = "PIC1"
    PIC2 = "PIC2"


def check_dimension(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or not MIN_DIM <= n <= MAX_DIM:
        raise DimensionError(f"dimension must be an integer in [{MIN_DIM}, {MAX_DIM}], got {n!r}")
    return int(n)


@lru_cache(maxsize=None)
def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the pairs ``i < j`` in lexicographic order."""
    return np.triu_indices(n, k=1)


@lru_cache(maxsize=None)
def _canonical_map(n: int) -> tuple[np.ndarray, np.ndarray]:
    """For every flat entry of an n^4 tensor, the flat index of its canonical
    representative and the sign relating the two."""
    i, j, k, l = np.indices((n, n, n, n)).reshape(4, -1)
    sign = np.ones(i.shape, dtype=float)
    swap = i > j
    i, j = np.where(swap, j, i), np.where(swap, i, j)
    sign[swap] *= -1
    swap = k > l
    k, l = np.where(swap, l, k), np.where(swap, k, l)
    sign[swap] *= -1
    swap = (i > k) | ((i == k) & (j > l))
    i, k = np.where(swap, k, i), np.where(swap, i, k)
    j, l = np.where(swap, l, j), np.where(swap, j, l)
    sign[(i == j) | (k == l)] = 0.0
    canon = ((i * n + j) * n + k) * n + l
    return canon, sign


def symmetrize(components: np.ndarray) -> np.ndarray:
    """Project onto pair-symmetric, antisymmetric tensors with exact symmetry."""
    x = np.asarray(components, dtype=float)
    x = 0.25 * (x - x.transpose(1, 0, 2, 3) - x.transpose(0, 1, 3, 2) + x.transpose(1, 0, 3, 2))
    x = 0.5 * (x + x.transpose(2, 3, 0, 1))
    n = x.shape[0]
    canon, sign = _canonical_map(n)
    return (sign * x.reshape(-1)[canon]).reshape(n, n, n, n)


def bianchi_sum(components: np.ndarray) -> np.ndarray:
    """Cyclic sum ``R_ijkl + R_iklj + R_iljk``."""
    x = np.asarray(components)
    return x + x.transpose(0, 2, 3, 1) + x.transpose(0, 3, 1, 2)


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """Immutable curvature-type tensor.

    ``bianchi`` records whether the first Bianchi identity is expected; it is
    validated on construction (relative tolerance 1e-9).
    """

    components: np.ndarray
    bianchi: bool = True
    _pair: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        comp = np.asarray(self.components, dtype=float)
        if comp.ndim != 4 or len(set(comp.shape)) != 1:
            raise DimensionError(f"expected an (n, n, n, n) array, got shape {comp.shape}")
        check_dimension(comp.shape[0])
        comp = symmetrize(comp)
        if self.bianchi:
            defect = np.abs(bianchi_sum(comp)).max()
            scale = max(np.abs(comp).max(), 1.0)
            if defect > BIANCHI_RTOL * scale:
                raise ValueError(f"first Bianchi identity violated (defect {defect:.3e})")
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @property
    def n(self) -> int:
        return self.components.shape[0]

    def pair_matrix(self) -> np.ndarray:
        if self._pair is None:
            r, c = pair_indices(self.n)
            m = self.components[r[:, None], c[:, None], r[None, :], c[None, :]]
            m.setflags(write=False)
            object.__setattr__(self, "_pair", m)
        return self._pair

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.components**2)))

    def bianchi_defect(self) -> float:
        return float(np.abs(bianchi_sum(self.components)).max())

    def _combine(self, other: CurvatureTensor, comp: np.ndarray) -> CurvatureTensor:
        _check_same_n(self.n, other.n)
        return CurvatureTensor(comp, bianchi=self.bianchi and other.bianchi)

    def __add__(self, other: CurvatureTensor) -> CurvatureTensor:
        if not isinstance(other, CurvatureTensor):
            return NotImplemented
        _check_same_n(self.n, other.n)
        return self._combine(other, self.components + other.components)

    def __sub__(self, other: CurvatureTensor) -> CurvatureTensor:
        if not isinstance(other, CurvatureTensor):
            return NotImplemented
        _check_same_n(self.n, other.n)
        return self._combine(other, self.components - other.components)

    def __mul__(self, c: float) -> CurvatureTensor:
        return CurvatureTensor(float(c) * self.components, bianchi=self.bianchi)

    __rmul__ = __mul__

    def __neg__(self) -> CurvatureTensor:
        return self * -1.0

    def rotated(self, g: np.ndarray) -> CurvatureTensor:
        """Pull back by the orthogonal matrix ``g``: ``R'_ijkl = g_ia g_jb g_kc g_ld R_abcd``."""
        g = np.asarray(g, dtype=float)
        comp = np.einsum("ia,jb,kc,ld,abcd->ijkl", g, g, g, g, self.components, optimize=True)
        return CurvatureTensor(comp, bianchi=self.bianchi)


def _check_same_n(n1: int, n2: int) -> None:
    if n1 != n2:
        raise DimensionError(f"dimension mismatch: {n1} vs {n2}")


def as_form(H: np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate a symmetric bilinear form."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    if n is not None:
        _check_same_n(H.shape[0], n)
    if not np.allclose(H, H.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("bilinear form is not symmetric")
    return 0.5 * (H + H.T)


def zero(n: int) -> CurvatureTensor:
    return CurvatureTensor(np.zeros((n, n, n, n)))


def from_pair_matrix(M: np.ndarray, n: int, bianchi: bool = True) -> CurvatureTensor:
    """Inverse of :meth:`CurvatureTensor.pair_matrix`."""
    r, c = pair_indices(n)
    comp = np.zeros((n, n, n, n))
    comp[r[:, None], c[:, None], r[None, :], c[None, :]] = M
    comp[c[:, None], r[:, None], r[None, :], c[None, :]] = -M
    comp[r[:, None], c[:, None], c[None, :], r[None, :]] = -M
    comp[c[:, None], r[:, None], c[None, :], r[None, :]] = M
    return CurvatureTensor(comp, bianchi=bianchi)


def kulkarni_nomizu(A: np.ndarray, B: np.ndarray) -> CurvatureTensor:
    """``(A ^ B)_ijkl = A_ik B_jl - A_il B_jk - A_jk B_il + A_jl B_ik``.

    The result satisfies the first Bianchi identity only when ``A ^ B`` is
    symmetrized in its arguments, which the formula already is for symmetric
    A and B.
    """
    A = as_form(A)
    B = as_form(B, A.shape[0])
    comp = (
        np.einsum("ik,jl->ijkl", A, B)
        - np.einsum("il,jk->ijkl", A, B)
        - np.einsum("jk,il->ijkl", A, B)
        + np.einsum("jl,ik->ijkl", A, B)
    )
    return CurvatureTensor(comp)


def identity_tensor(n: int) -> CurvatureTensor:
    """``id ^ id``: constant sectional curvature 2."""
    eye = np.eye(check_dimension(n))
    return kulkarni_nomizu(eye, eye)


def cylinder(n: int, axis: int | None = None) -> CurvatureTensor:
    """``(1/2) P ^ P`` with P the projection killing one coordinate axis
    (the last one by default): the curvature of S^{n-1} x R."""
    n = check_dimension(n)
    P = np.eye(n)
    P[n - 1 if axis is None else axis, n - 1 if axis is None else axis] = 0.0
    return 0.5 * kulkarni_nomizu(P, P)


def ricci(R: CurvatureTensor) -> np.ndarray:
    """``Ric_ik = sum_j R_ijkj``."""
    ric = np.einsum("ijkj->ik", R.components)
    return 0.5 * (ric + ric.T)


def scalar(R: CurvatureTensor) -> float:
    return float(np.trace(ricci(R)))


def tracefree(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    H0 = H - (np.trace(H) / H.shape[0]) * np.eye(H.shape[0])
    # trace removed exactly: subtract the computed mean of the diagonal
    H0[np.diag_indices_from(H0)] -= np.mean(np.diag(H0))
    return H0


def ricci_tracefree(R: CurvatureTensor) -> np.ndarray:
    return tracefree(ricci(R))


def square(R: CurvatureTensor) -> CurvatureTensor:
    """``(R^2)_ijkl = sum_{p,q} R_ijpq R_klpq``."""
    n = R.n
    X = R.components.reshape(n * n, n * n)
    return CurvatureTensor((X @ X.T).reshape(n, n, n, n), bianchi=False)


def sharp(R: CurvatureTensor) -> CurvatureTensor:
    """``(R#)_ijkl = 2 sum_{p,q} (R_ipkq R_jplq - R_iplq R_jpkq)``."""
    n = R.n
    X = R.components.transpose(0, 2, 1, 3).reshape(n * n, n * n)  # X[(i,k),(p,q)] = R_ipkq
    Z = (X @ X.T).reshape(n, n, n, n)  # Z[i,k,j,l] = sum R_ipkq R_jplq
    comp = 2.0 * (Z.transpose(0, 2, 1, 3) - Z.transpose(0, 2, 3, 1))
    return CurvatureTensor(comp, bianchi=False)


def q_quadratic(R: CurvatureTensor) -> CurvatureTensor:
    """Reaction term ``Q(R) = R^2 + R#`` of the curvature evolution."""
    return CurvatureTensor(square(R).components + sharp(R).components, bianchi=R.bianchi)


@lru_cache(maxsize=None)
def so_structure_constants(n: int) -> np.ndarray:
    """``C[a, b, c] = <[E_a, E_b], E_c>`` in the orthonormal pair basis of so(n)."""
    r, c = pair_indices(n)
    N = r.size
    E = np.zeros((N, n, n))
    E[np.arange(N), r, c] = 1.0
    E[np.arange(N), c, r] = -1.0
    prod = np.einsum("aij,bjk->abik", E, E)
    bracket = prod - prod.transpose(1, 0, 2, 3)
    C = 0.5 * np.einsum("abik,cik->abc", bracket, E)
    C.setflags(write=False)
    return C


def sharp_lie_oracle(R: CurvatureTensor) -> CurvatureTensor:
    """Sharp product through the adjoint representation of so(n).

    With ``ad_x`` the matrix of ``[x, .]`` and ``S`` the operator of R on
    two-forms, ``R#(x, y) = -tr(ad_x S ad_y S)``.  Only used as a cross-check
    of :func:`sharp`; it shares no code with the index formula.
    """
    n = R.n
    C = so_structure_constants(n)
    ad = C.transpose(0, 2, 1)  # ad[x][c, b] = <[E_x, E_b], E_c>
    S = R.pair_matrix()
    left = np.einsum("xcb,bd->xcd", ad, S)  # ad_x S
    # tr(ad_x S ad_y S) = sum_{c,d} (ad_x S)[c,d] (ad_y S)[d,c]
    M = -np.einsum("xcd,ydc->xy", left, left)
    return from_pair_matrix(0.5 * (M + M.T), n, bianchi=False)


def star_contract(S: CurvatureTensor, H: np.ndarray) -> np.ndarray:
    """``(S * H)_ik = sum_{p,q} S_ipkq H_pq``."""
    H = as_form(H, S.n)
    out = np.einsum("ipkq,pq->ik", S.components, H)
    return 0.5 * (out + out.T)


def random_algebraic(n: int, rng: np.random.Generator, scale: float = 1.0) -> CurvatureTensor:
    """Gaussian tensor projected onto the Bianchi subspace."""
    x = symmetrize(rng.normal(scale=scale, size=(n, n, n, n)))
    x = x - bianchi_sum(x) / 3.0
    return CurvatureTensor(x)


def random_curvature_type(n: int, rng: np.random.Generator, scale: float = 1.0) -> CurvatureTensor:
    """Gaussian pair-symmetric tensor without the Bianchi identity."""
    return CurvatureTensor(rng.normal(scale=scale, size=(n, n, n, n)), bianchi=False)


def random_form(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    A = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (A + A.T)


# --- isotropic functionals -------------------------------------------------


@dataclass(frozen=True)
class FourFrame:
    """Orthonormal four-frame stored as the columns of an ``(n, 4)`` matrix."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        F = np.asarray(self.vectors, dtype=float)
        if F.ndim != 2 or F.shape[1] != 4:
            raise DimensionError(f"expected an (n, 4) matrix, got shape {F.shape}")
        if np.abs(F.T @ F - np.eye(4)).max() > 1e-12:
            raise ValueError("frame vectors are not orthonormal")
        F = F.copy()
        F.setflags(write=False)
        object.__setattr__(self, "vectors", F)

    @classmethod
    def orthonormalized(cls, vectors: np.ndarray) -> FourFrame:
        return cls(orthonormalize(np.asarray(vectors, dtype=float)[None])[0])

    @classmethod
    def coordinate(cls, n: int, axes: tuple[int, int, int, int] = (0, 1, 2, 3)) -> FourFrame:
        F = np.zeros((n, 4))
        F[list(axes), range(4)] = 1.0
        return cls(F)

    @property
    def e(self) -> tuple[np.ndarray, ...]:
        return tuple(self.vectors[:, k] for k in range(4))


@dataclass(frozen=True)
class IsotropicProbe:
    frame: FourFrame
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.lam <= 1.0 and 0.0 <= self.mu <= 1.0):
            raise ValueError(f"lambda and mu must lie in [0, 1], got {self.lam}, {self.mu}")


def orthonormalize(F: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on the columns of a batch of ``(n, k)`` matrices."""
    Q, Rm = np.linalg.qr(F)
    d = np.sign(np.diagonal(Rm, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return Q * d[..., None, :]


def wedge_pairs(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pair coordinates of ``u ^ v`` for batches of vectors, shape ``(..., N)``."""
    r, c = pair_indices(u.shape[-1])
    return u[..., r] * v[..., c] - u[..., c] * v[..., r]


def frame_components(M: np.ndarray, F: np.ndarray) -> dict[str, np.ndarray]:
    """The six components ``R(e_a, e_b, e_c, e_d)`` entering the isotropic
    functionals, for a batch of frames ``F`` of shape ``(m, n, 4)``."""
    e1, e2, e3, e4 = (F[..., k] for k in range(4))
    w13, w14, w23, w24 = (wedge_pairs(u, v) for u, v in ((e1, e3), (e1, e4), (e2, e3), (e2, e4)))
    y13, y14, y23, y24 = w13 @ M, w14 @ M, w23 @ M, w24 @ M
    return {
        "1313": np.sum(y13 * w13, axis=-1),
        "1414": np.sum(y14 * w14, axis=-1),
        "2323": np.sum(y23 * w23, axis=-1),
        "2424": np.sum(y24 * w24, axis=-1),
        "1324": np.sum(y13 * w24, axis=-1),
        "1423": np.sum(y14 * w23, axis=-1),
    }


def isotropic_from_components(c: dict[str, np.ndarray], lam, mu):
    """Complexified value ``R(phi, conj(phi))`` for ``phi = (e1 + i mu e2) ^ (e3 + i lam e4)``.

    For Bianchi tensors ``R_1324 - R_1423 = R_1234``, recovering the familiar
    ``- 2 lam mu R_1234`` cross term.
    """
    return (
        c["1313"]
        + lam**2 * c["1414"]
        + mu**2 * c["2323"]
        + lam**2 * mu**2 * c["2424"]
        - 2.0 * lam * mu * (c["1324"] - c["1423"])
    )


def isotropic_value(R: CurvatureTensor, probe: IsotropicProbe, mode: Mode | str) -> float:
    mode = Mode(mode)
    if probe.frame.vectors.shape[0] != R.n:
        raise DimensionError("frame and tensor dimensions differ")
    lam = 1.0 if mode is Mode.PIC else probe.lam
    mu = probe.mu if mode is Mode.PIC2 else 1.0
    c = frame_components(R.pair_matrix(), probe.frame.vectors[None])
    return float(isotropic_from_components(c, lam, mu)[0])
