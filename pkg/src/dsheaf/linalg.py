"""Dense complex and block-sparse matrices, plus the Hermitian eigenvalue stack.

The eigensolver route is: lift a Hermitian matrix to a real symmetric matrix
of twice the size, diagonalize that with cyclic Jacobi rotations, and collapse
the doubled spectrum by pairing.  It exists to *verify* operators built
elsewhere, so it deliberately shares no code with the PSD inverse square root
used inside models (which goes through LAPACK's ``eigh``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_RTOL = 1e-10
JACOBI_OFF_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100
DEFAULT_CLAMP = 1e-8


def as_complex(a) -> np.ndarray:
    """Validate finiteness and return a complex128 copy."""
    out = np.array(a, dtype=np.complex128)
    if not np.all(np.isfinite(out.real)) or not np.all(np.isfinite(out.imag)):
        raise ValueError("matrix entries must be finite")
    return out


def matmul(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"shape mismatch for matmul: {a.shape} @ {b.shape}")
    return a @ b


def conj_transpose(a) -> np.ndarray:
    a = np.asarray(a)
    return np.conj(np.swapaxes(a, -1, -2))


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def hermiticity_defect(a) -> float:
    a = np.asarray(a)
    return max_abs(a - conj_transpose(a))


def _require_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if hermiticity_defect(m) > rtol * max(frobenius(m), 0.0) + 1e-300:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + conj_transpose(m))


def real_lift(m) -> np.ndarray:
    """Real symmetric 2Nx2N lift [[Re, -Im], [Im, Re]] of a Hermitian matrix.

    Every eigenvalue of the input appears exactly twice in the lift's
    spectrum.
    """
    mh = _require_hermitian(as_complex(m))
    re, im = mh.real, mh.imag
    return np.block([[re, -im], [im, re]])


def _round_robin_rounds(nn: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition all index pairs into rounds of pairwise-disjoint pivots."""
    players = list(range(nn)) + ([-1] if nn % 2 else [])
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        ps, qs = [], []
        for i in range(k // 2):
            p, q = players[i], players[k - 1 - i]
            if p >= 0 and q >= 0:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.asarray(ps, dtype=np.int64), np.asarray(qs, dtype=np.int64)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _offdiag_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_eigvalsh(s, *, off_rtol: float = JACOBI_OFF_RTOL,
                    max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every index pair once, grouped into rounds of disjoint
    pivot planes so a whole round is applied with vectorized row and column
    updates (rotations in disjoint planes commute and each still annihilates
    its own pivot).  Sweeps stop once the off-diagonal Frobenius norm drops
    below ``off_rtol`` times the Frobenius norm of the input; exceeding
    ``max_sweeps`` raises, because that cannot happen for symmetric input.
    """
    a = np.array(s, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if max_abs(a - a.T) > HERMITIAN_RTOL * max(frobenius(a), 0.0) + 1e-300:
        raise ValueError("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    nn = a.shape[0]
    if nn == 0:
        return np.zeros(0)
    if nn == 1:
        return a.diagonal().copy()
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return np.zeros(nn)
    tol = off_rtol * fro
    # leaving every skipped pivot below tol/nn keeps the total off-diagonal
    # norm below tol, so the skip threshold cannot mask non-convergence
    skip = tol / nn
    rounds = _round_robin_rounds(nn)
    for _ in range(max_sweeps):
        if _offdiag_norm(a) <= tol:
            return np.sort(np.diag(a))
        for ps, qs in rounds:
            apq = a[ps, qs]
            live = np.abs(apq) > skip
            if not live.any():
                continue
            p, q, piv = ps[live], qs[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * piv)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c
            # express the round as one full permutation multiply-add per side:
            # row r of the rotated matrix is coef1[r]*row(r) + coef2[r]*row(partner(r))
            partner = np.arange(nn)
            partner[p] = q
            partner[q] = p
            coef1 = np.ones(nn)
            coef1[p] = c
            coef1[q] = c
            coef2 = np.zeros(nn)
            coef2[p] = -sn
            coef2[q] = sn
            mixed = a[partner]
            a *= coef1[:, None]
            a += coef2[:, None] * mixed
            mixed = a[:, partner]
            a *= coef1[None, :]
            a += mixed * coef2[None, :]
            a[p, q] = 0.0
            a[q, p] = 0.0
    raise RuntimeError("Jacobi sweep cap exceeded on symmetric input (solver bug)")


def lift_eigvals(m) -> np.ndarray:
    """All 2N eigenvalues of the real lift, ascending (each one of M's twice)."""
    return jacobi_eigvalsh(real_lift(m))


def herm_eigvals(m) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix via the real-lift route.

    The doubled lift spectrum is collapsed by averaging adjacent sorted pairs.
    """
    m = as_complex(m)
    if m.size == 0:
        return np.zeros(0)
    vals = lift_eigvals(m)
    return 0.5 * (vals[0::2] + vals[1::2])


def _inv_sqrt_spectrum(w: np.ndarray, clamp: float) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo inverse-sqrt of eigenvalues with a relative clamp.

    Returns (g, mask) where g = w**-0.5 on unclamped eigenvalues and 0
    elsewhere.  ``w`` may be batched with eigenvalues along the last axis.
    """
    top = np.maximum(w[..., -1:], 0.0)
    thr = clamp * top
    mask = w > thr
    g = np.where(mask, 1.0 / np.sqrt(np.where(mask, w, 1.0)), 0.0)
    return g, mask


def inv_sqrt_psd(m, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """Hermitian pseudo inverse square root of a PSD matrix.

    Eigenvalues at or below ``clamp`` times the largest eigenvalue map to
    zero; genuinely indefinite input raises.
    """
    mh = _require_hermitian(as_complex(m))
    w, u = np.linalg.eigh(mh)
    if w.size and w[0] < -1e-10 * max(frobenius(mh), 1e-30):
        raise ValueError(f"matrix is indefinite (min eigenvalue {w[0]:g})")
    g, _ = _inv_sqrt_spectrum(w, clamp)
    out = (u * g) @ conj_transpose(u)
    return 0.5 * (out + conj_transpose(out))


def inv_sqrt_psd_batch(ms: np.ndarray, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """Batched :func:`inv_sqrt_psd` over a stack of Hermitian PSD blocks."""
    ms = np.asarray(ms, dtype=np.complex128)
    mh = 0.5 * (ms + conj_transpose(ms))
    w, u = np.linalg.eigh(mh)
    g, _ = _inv_sqrt_spectrum(w, clamp)
    out = (u * g[..., None, :]) @ conj_transpose(u)
    return 0.5 * (out + conj_transpose(out))


@dataclass
class BlockMatrix:
    """Block-sparse complex matrix: a grid of dense d x d blocks.

    Absent blocks are zero.  The dense realization has shape
    (block_rows * d, block_cols * d).
    """

    block_rows: int
    block_cols: int
    d: int
    blocks: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.block_rows < 0 or self.block_cols < 0 or self.d < 1:
            raise ValueError("invalid block grid dimensions")
        normalized = {}
        for key, b in self.blocks.items():
            i, j = (int(key[0]), int(key[1]))
            self._check_key(i, j)
            normalized[(i, j)] = self._check_block(b)
        self.blocks = normalized

    def _check_key(self, i: int, j: int) -> None:
        if not (0 <= i < self.block_rows and 0 <= j < self.block_cols):
            raise KeyError(f"block ({i}, {j}) outside {self.block_rows} x {self.block_cols} grid")

    def _check_block(self, b) -> np.ndarray:
        b = as_complex(b)
        if b.shape != (self.d, self.d):
            raise ValueError(f"block must be ({self.d}, {self.d}), got {b.shape}")
        return b

    def set_block(self, i: int, j: int, b) -> None:
        self._check_key(i, j)
        self.blocks[(i, j)] = self._check_block(b)

    def add_block(self, i: int, j: int, b) -> None:
        self._check_key(i, j)
        b = self._check_block(b)
        if (i, j) in self.blocks:
            self.blocks[(i, j)] = self.blocks[(i, j)] + b
        else:
            self.blocks[(i, j)] = b

    def block(self, i: int, j: int) -> np.ndarray:
        self._check_key(i, j)
        found = self.blocks.get((i, j))
        return found.copy() if found is not None else np.zeros((self.d, self.d), dtype=np.complex128)

    def dense(self) -> np.ndarray:
        d = self.d
        out = np.zeros((self.block_rows * d, self.block_cols * d), dtype=np.complex128)
        for (i, j), b in self.blocks.items():
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] = b
        return out

    def conj_transpose(self) -> "BlockMatrix":
        """Block (i, j) maps to its conjugate transpose at (j, i)."""
        flipped = {(j, i): np.conj(b.T) for (i, j), b in self.blocks.items()}
        return BlockMatrix(self.block_cols, self.block_rows, self.d, flipped)

    def matmul(self, other):
        """Multiply with another BlockMatrix (block result) or a dense array."""
        d = self.d
        if isinstance(other, BlockMatrix):
            if other.block_rows != self.block_cols or other.d != d:
                raise ValueError("block grids are not conformable")
            by_row: dict[int, list[tuple[int, np.ndarray]]] = {}
            for (j, k), b in other.blocks.items():
                by_row.setdefault(j, []).append((k, b))
            out = BlockMatrix(self.block_rows, other.block_cols, d)
            for (i, j), a in self.blocks.items():
                for k, b in by_row.get(j, ()):
                    out.add_block(i, k, a @ b)
            return out
        x = np.asarray(other, dtype=np.complex128)
        if x.shape[0] != self.block_cols * d:
            raise ValueError(f"shape mismatch: {self.block_cols * d} block columns vs {x.shape}")
        out = np.zeros((self.block_rows * d,) + x.shape[1:], dtype=np.complex128)
        for (i, j), b in self.blocks.items():
            out[i * d:(i + 1) * d] += b @ x[j * d:(j + 1) * d]
        return out

    def __matmul__(self, other):
        return self.matmul(other)
