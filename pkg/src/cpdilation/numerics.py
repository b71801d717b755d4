"""Dense complex linear-algebra kernels shared by the other modules.

Everything here is a pure function of its inputs.  Rank decisions use a
relative cutoff against the largest singular value (or eigenvalue), and every
returned basis is normalised so that the first entry of largest modulus in
each column is real and positive.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.stats

from .errors import InvalidMatrix, NotPSD

_CONFIG = {"rank_tol": 1e-9}

# entries within this relative margin of the column maximum count as ties
_PHASE_TIE = 1e-8


def rank_tol() -> float:
    """Current default relative rank tolerance."""
    return _CONFIG["rank_tol"]


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not (0.0 < tol <= 1e-3):
        raise ValueError(f"tolerance must lie in (0, 1e-3], got {tol!r}")
    return tol


def set_rank_tol(tol: float) -> None:
    _CONFIG["rank_tol"] = _check_tol(tol)


@contextmanager
def rank_tolerance(tol: float) -> Iterator[float]:
    """Temporarily override the default rank tolerance."""
    old = _CONFIG["rank_tol"]
    _CONFIG["rank_tol"] = _check_tol(tol)
    try:
        yield _CONFIG["rank_tol"]
    finally:
        _CONFIG["rank_tol"] = old


def _resolve(tol: Optional[float]) -> float:
    return rank_tol() if tol is None else _check_tol(tol)


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d complex array or raise InvalidMatrix."""
    try:
        M = np.asarray(A, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"{name} is not numeric: {exc}") from exc
    if M.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return M


def opnorm(A: np.ndarray) -> float:
    """Spectral norm; 0 for empty arrays."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if A.ndim == 1:
        return float(np.linalg.norm(A))
    return float(np.linalg.norm(A, 2))


def max_opnorm(stack: np.ndarray) -> float:
    """Largest spectral norm over a stack of matrices (batched SVD)."""
    stack = np.asarray(stack)
    if stack.size == 0:
        return 0.0
    return float(np.max(np.linalg.svd(stack, compute_uv=False)))


def dag(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + dag(A))


def fix_phases(B: np.ndarray) -> np.ndarray:
    """Rotate each column so its first largest-modulus entry is real positive."""
    B = np.array(B, dtype=complex, copy=True)
    if B.size == 0:
        return B
    mod = np.abs(B)
    top = mod.max(axis=0)
    for j in range(B.shape[1]):
        if top[j] == 0.0:
            continue
        k = int(np.argmax(mod[:, j] >= top[j] * (1.0 - _PHASE_TIE)))
        B[:, j] *= np.conj(B[k, j]) / mod[k, j]
    return B


@dataclass(frozen=True)
class RankDecision:
    """Outcome of a rank-revealing decomposition.

    ``basis`` holds orthonormal columns; ``rank`` is their number.
    """

    tolerance_rel: float
    rank: int
    basis: np.ndarray


def _svd(A: np.ndarray):
    try:
        return np.linalg.svd(A, full_matrices=True)
    except np.linalg.LinAlgError:  # pragma: no cover - LAPACK fallback
        return scipy.linalg.svd(A, full_matrices=True, lapack_driver="gesvd")


def null_space(A, tol: Optional[float] = None, scale: Optional[float] = None) -> RankDecision:
    """Orthonormal basis of the numerical kernel of ``A``.

    Singular values at most ``tol * max(s_max, scale)`` are treated as zero;
    pass ``scale`` when ``A`` may vanish up to rounding noise.
    """
    tol = _resolve(tol)
    A = as_matrix(A, "A")
    n = A.shape[1]
    if A.shape[0] == 0 or n == 0:
        return RankDecision(tol, n, fix_phases(np.eye(n, dtype=complex)))
    _, s, vh = _svd(A)
    ref = max(s[0] if s.size else 0.0, scale or 0.0)
    r = int(np.sum(s > tol * ref)) if ref > 0 else 0
    basis = fix_phases(dag(vh[r:]))
    return RankDecision(tol, basis.shape[1], basis)


def range_basis(A, tol: Optional[float] = None, scale: Optional[float] = None) -> RankDecision:
    """Orthonormal basis of the numerical column space of ``A``."""
    tol = _resolve(tol)
    A = as_matrix(A, "A")
    m = A.shape[0]
    if A.size == 0:
        return RankDecision(tol, 0, np.zeros((m, 0), dtype=complex))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    ref = max(s[0], scale or 0.0)
    r = int(np.sum(s > tol * ref)) if ref > 0 else 0
    return RankDecision(tol, r, fix_phases(u[:, :r]))


def numerical_rank(A, tol: Optional[float] = None, scale: Optional[float] = None) -> int:
    return range_basis(A, tol, scale).rank


@dataclass(frozen=True)
class GramQuotient:
    """Numerical Hausdorff quotient of a pre-inner-product space.

    For a positive semidefinite Gram matrix ``G`` on raw coordinates the
    fields satisfy ``Q G Q^H = I``, ``embed = Q G`` (raw vector to quotient
    coordinates, so that ``<embed c, embed c'> = c^H G c'``) and
    ``lift = Q^H`` (a right inverse of ``embed``).
    """

    Q: np.ndarray
    embed: np.ndarray
    lift: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def raw_dim(self) -> int:
        return self.Q.shape[1]

    def push(self, A_raw: np.ndarray, source: "GramQuotient" = None) -> np.ndarray:
        """Transport a raw-space operator (null space preserving) to quotients."""
        src = self if source is None else source
        return self.embed @ A_raw @ src.lift


def gram_quotient(G, tol: Optional[float] = None, scale: Optional[float] = None) -> GramQuotient:
    tol = _resolve(tol)
    G = as_matrix(G, "G")
    if G.shape[0] != G.shape[1]:
        raise InvalidMatrix(f"Gram matrix must be square, got {G.shape}")
    n = G.shape[0]
    if n == 0:
        z = np.zeros((0, 0), dtype=complex)
        return GramQuotient(z, z, z, np.zeros(0))
    H = hermitian_part(G)
    w, U = np.linalg.eigh(H)
    scale = max(abs(w[0]), abs(w[-1]), scale or 0.0)
    if scale > 0 and w[0] < -tol * scale:
        raise NotPSD(
            f"Gram matrix has eigenvalue {w[0]:.3e} below -tol*||G||",
            defect=float(-w[0]),
        )
    keep = w > tol * scale if scale > 0 else np.zeros(n, dtype=bool)
    # descending order, deterministic phases
    idx = np.nonzero(keep)[0][::-1]
    s = w[idx]
    V = fix_phases(U[:, idx])
    rs = np.sqrt(s)
    Q = dag(V) / rs[:, None]
    embed = dag(V) * rs[:, None]
    lift = V / rs[None, :]
    return GramQuotient(Q, embed, lift, s)


def gram_quotient_basis(G, tol: Optional[float] = None, scale: Optional[float] = None) -> Tuple[np.ndarray, int]:
    """Return ``(Q, dim)`` with ``Q G Q^H = I_dim``."""
    gq = gram_quotient(G, tol, scale)
    return gq.Q, gq.dim


def psd_sqrt(A, tol: Optional[float] = None) -> np.ndarray:
    """Hermitian PSD square root, clamping slightly negative eigenvalues."""
    tol = _resolve(tol)
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"square matrix expected, got {A.shape}")
    if A.size == 0:
        return A.copy()
    w, U = np.linalg.eigh(hermitian_part(A))
    bound = tol * max(1.0, float(np.max(np.abs(w))))
    if w[0] < -bound:
        raise NotPSD(f"eigenvalue {w[0]:.3e} is negative beyond tolerance", defect=float(-w[0]))
    r = np.sqrt(np.clip(w, 0.0, None))
    return (U * r[None, :]) @ dag(U)


def stack_columns(blocks: Sequence[np.ndarray], rows: int) -> np.ndarray:
    if not blocks:
        return np.zeros((rows, 0), dtype=complex)
    return np.concatenate([np.asarray(b, dtype=complex).reshape(rows, -1) for b in blocks], axis=1)


def block_diag(*blocks: np.ndarray) -> np.ndarray:
    return scipy.linalg.block_diag(*blocks).astype(complex)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return scipy.stats.unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(
        2j * np.pi * rng.random()) * np.ones((1, 1))


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random isometry C^cols -> C^rows (first columns of a Haar unitary)."""
    return haar_unitary(rows, rng)[:, :cols]
