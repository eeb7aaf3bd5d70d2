"""Minimal reverse-mode tape over real and complex numpy arrays.

Gradient convention: for a real-valued objective L, the stored gradient of a
complex array z = x + iy is dL/dx + i * dL/dy, and gradients of real arrays
are real.  Complex steps are differentiated through their real and imaginary
parts, so non-holomorphic operations (conj, real, imag, magnitude masks) are
first-class citizens rather than special cases.

Only the operations needed by the diffusion model are provided; each op
records value + vjp closures on a Var, and :func:`backward` replays them in
reverse creation order.
"""

from __future__ import annotations

import itertools

import numpy as np

from .linalg import conj_transpose as _ct

_EIG_DEGENERATE_RTOL = 1e-9


class Var:
    """Tape node: an array value plus vjp links to its parents."""

    __slots__ = ("value", "parents", "uid")
    _ids = itertools.count()

    def __init__(self, value, parents=()):
        self.value = np.asarray(value)
        self.parents = tuple(parents)
        self.uid = next(Var._ids)

    @property
    def shape(self):
        return self.value.shape


def constant(value) -> Var:
    return Var(value)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, vs) in enumerate(zip(g.shape, shape)) if vs == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _match(parent: Var, g) -> np.ndarray:
    """Fit a vjp contribution to the parent: unbroadcast, realify if needed."""
    g = _unbroadcast(np.asarray(g), parent.value.shape)
    if not np.iscomplexobj(parent.value) and np.iscomplexobj(g):
        g = g.real
    return g


def backward(root: Var, wrt: dict[str, Var], seed=None) -> dict[str, np.ndarray]:
    """Gradients of the scalar ``root`` with respect to the named leaves.

    Leaves that the tape never touches get zero gradients.
    """
    if seed is None:
        seed = np.ones_like(root.value, dtype=np.float64)
    grads: dict[int, np.ndarray] = {root.uid: np.asarray(seed)}
    # reverse creation order is a topological order: parents precede children
    reachable: dict[int, Var] = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.uid in reachable:
            continue
        reachable[node.uid] = node
        stack.extend(p for p, _ in node.parents)
    for uid in sorted(reachable, reverse=True):
        node = reachable[uid]
        g = grads.get(uid)
        if g is None:
            continue
        for parent, vjp in node.parents:
            contrib = _match(parent, vjp(g))
            if parent.uid in grads:
                grads[parent.uid] = grads[parent.uid] + contrib
            else:
                grads[parent.uid] = contrib
    out = {}
    for name, var in wrt.items():
        g = grads.get(var.uid)
        if g is None:
            g = np.zeros(var.value.shape, dtype=np.float64 if not np.iscomplexobj(var.value) else np.complex128)
        out[name] = g
    return out


# --- arithmetic ---------------------------------------------------------


def add(a: Var, b: Var) -> Var:
    return Var(a.value + b.value, ((a, lambda g: g), (b, lambda g: g)))


def sub(a: Var, b: Var) -> Var:
    return Var(a.value - b.value, ((a, lambda g: g), (b, lambda g: -g)))


def neg(a: Var) -> Var:
    return Var(-a.value, ((a, lambda g: -g),))


def mul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return Var(av * bv, ((a, lambda g: g * np.conj(bv)), (b, lambda g: g * np.conj(av))))


def scale(a: Var, c) -> Var:
    return Var(c * a.value, ((a, lambda g: np.conj(c) * g),))


def add_scalar(a: Var, c) -> Var:
    return Var(a.value + c, ((a, lambda g: g),))


def matmul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return Var(av @ bv, ((a, lambda g: g @ _ct(bv)), (b, lambda g: _ct(av) @ g)))


def conj(a: Var) -> Var:
    return Var(np.conj(a.value), ((a, lambda g: np.conj(g)),))


def conj_t(a: Var) -> Var:
    return Var(_ct(a.value), ((a, lambda g: _ct(g)),))


def real(a: Var) -> Var:
    return Var(a.value.real.copy(), ((a, lambda g: g),))


def imag(a: Var) -> Var:
    return Var(a.value.imag.copy(), ((a, lambda g: 1j * g),))


def astype_complex(a: Var) -> Var:
    return Var(a.value.astype(np.complex128), ((a, lambda g: g),))


# --- shape ops ----------------------------------------------------------


def reshape(a: Var, shape) -> Var:
    old = a.value.shape
    return Var(a.value.reshape(shape), ((a, lambda g: g.reshape(old)),))


def concat(parts: list[Var], axis: int) -> Var:
    values = [p.value for p in parts]
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(k):
        sl = [slice(None)] * values[0].ndim
        sl[axis] = slice(int(offsets[k]), int(offsets[k + 1]))
        sl = tuple(sl)
        return lambda g: g[sl]

    return Var(np.concatenate(values, axis=axis),
               tuple((p, make_vjp(k)) for k, p in enumerate(parts)))


def _segment_add(values: np.ndarray, idx: np.ndarray, num: int) -> np.ndarray:
    """Sum ``values`` rows into ``num`` buckets (sort + reduceat, no ufunc.at)."""
    out = np.zeros((num,) + values.shape[1:], dtype=values.dtype)
    if idx.size == 0:
        return out
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
    out[sorted_idx[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def take_rows(a: Var, idx: np.ndarray) -> Var:
    idx = np.asarray(idx, dtype=np.int64)
    rows = a.value.shape[0]
    return Var(a.value[idx], ((a, lambda g: _segment_add(g, idx, rows)),))


def segment_sum(a: Var, idx: np.ndarray, num: int) -> Var:
    idx = np.asarray(idx, dtype=np.int64)
    return Var(_segment_add(a.value, idx, num), ((a, lambda g: g[idx]),))


def scatter_blocks(vals: Var, rows: np.ndarray, cols: np.ndarray, n: int) -> Var:
    """Accumulate (k, d, d) blocks into a dense (n*d, n*d) matrix."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    d = vals.value.shape[-1]
    grid = np.zeros((n, n, d, d), dtype=vals.value.dtype)
    np.add.at(grid, (rows, cols), vals.value)
    dense = grid.transpose(0, 2, 1, 3).reshape(n * d, n * d)

    def vjp(g):
        g4 = g.reshape(n, d, n, d).transpose(0, 2, 1, 3)
        return g4[rows, cols]

    return Var(dense, ((vals, vjp),))


# --- nonlinearities -----------------------------------------------------


def tanh(a: Var) -> Var:
    t = np.tanh(a.value)
    return Var(t, ((a, lambda g: g * (1.0 - t * t)),))


def relu(a: Var) -> Var:
    mask = a.value > 0.0
    return Var(a.value * mask, ((a, lambda g: g * mask),))


def elu(a: Var) -> Var:
    av = a.value
    pos = av > 0.0
    small = np.expm1(np.where(pos, 0.0, av))
    value = np.where(pos, av, small)
    deriv = np.where(pos, 1.0, small + 1.0)
    return Var(value, ((a, lambda g: g * deriv),))


def crelu(a: Var) -> Var:
    """Complex relu: pass z through where its real part is >= 0, else 0."""
    mask = a.value.real >= 0.0
    return Var(a.value * mask, ((a, lambda g: g * mask),))


# --- matrix functions ---------------------------------------------------


def inverse(a: Var) -> Var:
    inv = np.linalg.inv(a.value)

    def vjp(g):
        ih = _ct(inv)
        return -(ih @ g @ ih)

    return Var(inv, ((a, vjp),))


def inv_sqrt_psd_blocks(a: Var, clamp: float) -> Var:
    """Hermitian pseudo inverse square root of a stack of PSD blocks.

    The clamp threshold (relative to each block's largest eigenvalue) is
    treated as locally constant, so clamped eigendirections carry zero
    derivative.  The backward pass sandwiches the upstream gradient with the
    eigenbasis and the divided differences of the spectral map.
    """
    mh = 0.5 * (a.value + _ct(a.value))
    w, u = np.linalg.eigh(mh)
    top = np.maximum(w[..., -1:], 0.0)
    mask = w > clamp * top
    g_eval = np.where(mask, 1.0 / np.sqrt(np.where(mask, w, 1.0)), 0.0)
    out = (u * g_eval[..., None, :]) @ _ct(u)
    out = 0.5 * (out + _ct(out))

    def vjp(g):
        gh = 0.5 * (g + _ct(g))
        p = _ct(u) @ gh @ u
        wi = w[..., :, None]
        wj = w[..., None, :]
        gi = g_eval[..., :, None]
        gj = g_eval[..., None, :]
        dg = np.where(mask, -0.5 * g_eval ** 3, 0.0)
        denom = wi - wj
        scale_w = np.maximum(np.abs(w).max(axis=-1), 1e-300)[..., None, None]
        degenerate = np.abs(denom) <= _EIG_DEGENERATE_RTOL * scale_w
        diff = np.where(degenerate, 0.5 * (dg[..., :, None] + dg[..., None, :]),
                        (gi - gj) / np.where(degenerate, 1.0, denom))
        gm = u @ (diff * p) @ _ct(u)
        return 0.5 * (gm + _ct(gm))

    return Var(out, ((a, vjp),))


# --- structured embeddings ---------------------------------------------


def diag_embed(a: Var) -> Var:
    """(..., d) -> (..., d, d) diagonal blocks."""
    d = a.value.shape[-1]
    idx = np.arange(d)
    value = np.zeros(a.value.shape + (d,), dtype=a.value.dtype)
    value[..., idx, idx] = a.value
    return Var(value, ((a, lambda g: g[..., idx, idx]),))


def skew_embed(a: Var, d: int) -> Var:
    """(..., d*(d-1)/2) -> (..., d, d) skew-symmetric blocks.

    Parameters fill the strict upper triangle row-major; the lower triangle
    is the negation.
    """
    iu, ju = np.triu_indices(d, k=1)
    value = np.zeros(a.value.shape[:-1] + (d, d), dtype=a.value.dtype)
    value[..., iu, ju] = a.value
    value[..., ju, iu] = -a.value
    return Var(value, ((a, lambda g: g[..., iu, ju] - g[..., ju, iu]),))


def cayley(a: Var, d: int) -> Var:
    """Orthogonal blocks (I - S)(I + S)^{-1} from skew parameters."""
    skew = skew_embed(a, d)
    eye = constant(np.eye(d))
    return matmul(sub(eye, skew), inverse(add(skew, eye)))


# --- objectives ---------------------------------------------------------


def masked_softmax_cross_entropy(logits: Var, labels: np.ndarray, mask: np.ndarray) -> Var:
    """Mean negative log-softmax over masked rows (log-sum-exp stabilized)."""
    z = logits.value
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("loss mask selects no nodes")
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1)) + zmax[:, 0]
    picked = z[np.arange(z.shape[0]), labels]
    loss = float((lse[mask] - picked[mask]).sum() / count)

    def vjp(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(z.shape[0]), labels] -= 1.0
        p *= mask[:, None] / count
        return float(g) * p

    return Var(np.float64(loss), ((logits, vjp),))
