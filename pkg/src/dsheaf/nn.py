"""Sheaf diffusion network for directed graphs.

The model encodes node features into d-dimensional stalks, learns real
restriction maps per (edge, endpoint) from endpoint features, assembles the
normalized directed sheaf Laplacian, and applies residual diffusion layers

    X <- diag(1 + eps) X - act(L_N (I_n (x) W1) X W2)

in the complex domain, decoding through real/imaginary concatenation.  All
trainable parameters are real; complex values enter only through the
direction phases.  Gradients come from the reverse-mode tape in
:mod:`dsheaf.autodiff`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import DirectedGraph
from .sheaf import MapClass, edge_phases

SHEAF_ACTIVATIONS = {"tanh": ad.tanh, "elu": ad.elu, "relu": ad.relu}


def map_param_count(map_class: MapClass, d: int) -> int:
    map_class = MapClass(map_class)
    if map_class is MapClass.DIAGONAL:
        return d
    if map_class is MapClass.ORTHOGONAL:
        return d * (d - 1) // 2
    return d * d


@dataclass
class ModelConfig:
    input_dim: int
    num_classes: int
    num_layers: int = 2
    d: int = 2
    q: float = 0.25
    hidden_channels: int = 8
    map_class: MapClass = MapClass.DIAGONAL
    sheaf_act: str = "tanh"
    dropout: float = 0.0
    recompute_maps: str = "per_layer"
    phi_hidden: int = 16
    clamp: float = 1e-8
    identity_start_maps: bool = True

    def __post_init__(self):
        if self.num_layers < 1 or self.d < 1 or self.hidden_channels < 1:
            raise ValueError("num_layers, d, and hidden_channels must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.sheaf_act not in SHEAF_ACTIVATIONS:
            raise ValueError(f"sheaf_act must be one of {sorted(SHEAF_ACTIVATIONS)}")
        if self.recompute_maps not in ("per_layer", "once"):
            raise ValueError("recompute_maps must be 'per_layer' or 'once'")
        self.map_class = MapClass(self.map_class)


@dataclass
class PhiParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class LayerParams:
    phi: PhiParams
    w1: np.ndarray
    w2: np.ndarray
    eps_raw: np.ndarray


@dataclass
class ModelParams:
    w_in: np.ndarray
    b_in: np.ndarray
    layers: list[LayerParams]
    w_out: np.ndarray
    b_out: np.ndarray


def named_params(params: ModelParams) -> dict[str, np.ndarray]:
    """Flatten parameters into an ordered name -> array map."""
    out = {"w_in": params.w_in, "b_in": params.b_in}
    for t, layer in enumerate(params.layers):
        out[f"layer{t}.phi.w1"] = layer.phi.w1
        out[f"layer{t}.phi.b1"] = layer.phi.b1
        out[f"layer{t}.phi.w2"] = layer.phi.w2
        out[f"layer{t}.phi.b2"] = layer.phi.b2
        out[f"layer{t}.w1"] = layer.w1
        out[f"layer{t}.w2"] = layer.w2
        out[f"layer{t}.eps_raw"] = layer.eps_raw
    out["w_out"] = params.w_out
    out["b_out"] = params.b_out
    return out


def params_from_named(named: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild structured parameters from the flat map."""
    layer_ids = sorted({int(m.group(1)) for k in named
                        if (m := re.match(r"layer(\d+)\.", k))})
    layers = [LayerParams(
        phi=PhiParams(named[f"layer{t}.phi.w1"], named[f"layer{t}.phi.b1"],
                      named[f"layer{t}.phi.w2"], named[f"layer{t}.phi.b2"]),
        w1=named[f"layer{t}.w1"], w2=named[f"layer{t}.w2"],
        eps_raw=named[f"layer{t}.eps_raw"]) for t in layer_ids]
    return ModelParams(w_in=named["w_in"], b_in=named["b_in"], layers=layers,
                       w_out=named["w_out"], b_out=named["b_out"])


def params_copy(params: ModelParams) -> ModelParams:
    return params_from_named({k: v.copy() for k, v in named_params(params).items()})


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    lim = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-lim, lim, size=shape)


def _identity_map_bias(config: ModelConfig) -> np.ndarray:
    """Output bias that makes the initial restriction maps (a multiple of)
    the identity, so diffusion starts from the trivial-sheaf operator.

    The normalized Laplacian is invariant to a common map scale, so the
    activation's value at 1 does not matter for diagonal maps; orthogonal
    maps are the identity at zero skew parameters already.
    """
    d = config.d
    if config.map_class is MapClass.DIAGONAL:
        return np.ones(d)
    if config.map_class is MapClass.ORTHOGONAL:
        return np.zeros(d * (d - 1) // 2)
    return np.eye(d).reshape(-1)


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Symmetric-uniform weight init; eps starts at zero.

    The input and output projections are affine; their biases draw from
    U(+-1/sqrt(fan_in)) so the encoded stalks carry a constant-over-nodes
    component from the first epoch (diffusion needs it to read out per-node
    connectivity statistics).  With ``identity_start_maps`` the map network's
    output bias is set so the initial restriction maps sit at the identity
    instead of near zero.
    """
    d, f = config.d, config.hidden_channels
    df = d * f
    odim = map_param_count(config.map_class, d)
    b2 = _identity_map_bias(config) if config.identity_start_maps else np.zeros(odim)
    layers = []
    for _ in range(config.num_layers):
        phi = PhiParams(w1=_glorot(rng, (2 * df, config.phi_hidden)),
                        b1=np.zeros(config.phi_hidden),
                        w2=_glorot(rng, (config.phi_hidden, odim)),
                        b2=b2.copy())
        layers.append(LayerParams(phi=phi, w1=_glorot(rng, (d, d)),
                                  w2=_glorot(rng, (f, f)), eps_raw=np.zeros(d)))
    return ModelParams(
        w_in=_glorot(rng, (config.input_dim, df)),
        b_in=rng.uniform(-1.0, 1.0, size=df) / np.sqrt(config.input_dim),
        layers=layers,
        w_out=_glorot(rng, (2 * df, config.num_classes)),
        b_out=rng.uniform(-1.0, 1.0, size=config.num_classes) / np.sqrt(2 * df))


# --- plain (untaped) building blocks ------------------------------------


def complex_relu(z: np.ndarray) -> np.ndarray:
    """z where Re(z) >= 0, else 0, elementwise."""
    z = np.asarray(z, dtype=np.complex128)
    return np.where(z.real >= 0.0, z, 0.0)


def encode(features: np.ndarray, w_in: np.ndarray, d: int,
           b_in: np.ndarray | None = None) -> np.ndarray:
    """Affinely project (n, f0) features to (n*d, f) complex stalk channels.

    The projection output is reshaped row-major, so each node's d stalk rows
    are contiguous.
    """
    y = np.asarray(features) @ np.asarray(w_in)
    if b_in is not None:
        y = y + np.asarray(b_in)
    n, df = y.shape
    if df % d != 0:
        raise ValueError(f"projection width {df} not divisible by stalk dimension {d}")
    return y.reshape(n * d, df // d).astype(np.complex128)


def unwind(x: np.ndarray) -> np.ndarray:
    """Concatenate real and imaginary parts along the feature axis."""
    x = np.asarray(x, dtype=np.complex128)
    return np.concatenate([x.real, x.imag], axis=1)


def decode(x_final: np.ndarray, w_out: np.ndarray, d: int,
           b_out: np.ndarray | None = None) -> np.ndarray:
    """Invert the encode reshape, unwind, and affinely project to logits."""
    x = np.asarray(x_final)
    nd, f = x.shape
    if nd % d != 0:
        raise ValueError(f"row count {nd} not divisible by stalk dimension {d}")
    logits = unwind(x.reshape(nd // d, d * f)) @ np.asarray(w_out)
    if b_out is not None:
        logits = logits + np.asarray(b_out)
    return logits


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                          mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-softmax over masked rows, plus its logits gradient."""
    z = np.asarray(logits, dtype=np.float64)
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
    grad = np.exp(shifted)
    grad /= grad.sum(axis=1, keepdims=True)
    grad[np.arange(z.shape[0]), labels] -= 1.0
    grad *= mask[:, None] / count
    return loss, grad


def dropout_apply(x: np.ndarray, p: float, rng: np.random.Generator | None,
                  training: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout; identity outside training.  Returns (output, mask)."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    x = np.asarray(x)
    if not training or p == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs a generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


@dataclass
class ForwardCache:
    """Everything the backward pass and replay checks need from a forward."""

    param_vars: dict[str, ad.Var]
    logits: ad.Var
    loss: ad.Var | None = None
    dropout_masks: list[np.ndarray | None] = field(default_factory=list)
    layer_maps: list[np.ndarray] = field(default_factory=list)
    layer_degrees: list[np.ndarray] = field(default_factory=list)
    layer_laplacians: list[np.ndarray] = field(default_factory=list)
    final_stalks: np.ndarray | None = None

    @property
    def logit_values(self) -> np.ndarray:
        return self.logits.value


def backward(cache: ForwardCache, loss_grad: float = 1.0) -> dict[str, np.ndarray]:
    """Gradients of the cached loss for every parameter tensor."""
    if cache.loss is None:
        raise ValueError("cache has no loss node; call the loss-building forward")
    return ad.backward(cache.loss, cache.param_vars, seed=np.float64(loss_grad))


class SheafDiffusionModel:
    """Diffusion model bound to one graph; parameters stay external."""

    def __init__(self, config: ModelConfig, graph: DirectedGraph):
        self.config = config
        self.graph = graph
        self.n, self.m = graph.n, graph.m
        slots = graph.edge_slots()
        self.first_idx = slots[:, 0]
        self.second_idx = slots[:, 1]
        self.phases = edge_phases(graph, config.q)
        self.node_idx_2m = np.concatenate([self.first_idx, self.second_idx])
        self.eps_tile_idx = np.tile(np.arange(config.d), self.n)
        nodes = np.arange(self.n)
        self.scat_rows = np.concatenate([nodes, self.first_idx, self.second_idx])
        self.scat_cols = np.concatenate([nodes, self.second_idx, self.first_idx])

    def init_params(self, rng: np.random.Generator) -> ModelParams:
        return init_params(self.config, rng)

    # -- taped building blocks --

    def _phi(self, pv: dict[str, ad.Var], t: int, inp: ad.Var) -> ad.Var:
        h = ad.tanh(ad.add(ad.matmul(inp, pv[f"layer{t}.phi.w1"]), pv[f"layer{t}.phi.b1"]))
        return ad.add(ad.matmul(h, pv[f"layer{t}.phi.w2"]), pv[f"layer{t}.phi.b2"])

    def _learn_maps(self, pv: dict[str, ad.Var], t: int, x: ad.Var) -> ad.Var:
        """Base restriction maps from current stalk features, shape (2m, d, d).

        Rows [0, m) belong to each edge's first endpoint, rows [m, 2m) to the
        second; each endpoint sees (own features || neighbor features).
        """
        cfg = self.config
        nodes = ad.reshape(ad.real(x), (self.n, cfg.d * cfg.hidden_channels))
        xa = ad.take_rows(nodes, self.first_idx)
        xb = ad.take_rows(nodes, self.second_idx)
        inp = ad.concat([ad.concat([xa, xb], axis=1), ad.concat([xb, xa], axis=1)], axis=0)
        out = SHEAF_ACTIVATIONS[cfg.sheaf_act](self._phi(pv, t, inp))
        if cfg.map_class is MapClass.DIAGONAL:
            return ad.diag_embed(out)
        if cfg.map_class is MapClass.ORTHOGONAL:
            return ad.cayley(out, cfg.d)
        return ad.reshape(out, (2 * self.m, cfg.d, cfg.d))

    def _normalized_laplacian(self, maps: ad.Var) -> tuple[ad.Var, ad.Var]:
        """Normalized Laplacian blocks, shape (n + 2m, d, d), plus degree blocks.

        Block k sits at grid position (scat_rows[k], scat_cols[k]): first the
        n diagonal blocks, then one block per edge and its conjugate mirror.
        """
        cfg = self.config
        n, m, d = self.n, self.m, cfg.d
        if m > 0:
            eff_a = ad.astype_complex(ad.take_rows(maps, np.arange(m)))
            eff_b = ad.mul(ad.astype_complex(ad.take_rows(maps, np.arange(m, 2 * m))),
                           ad.constant(self.phases[:, None, None]))
            prod_aa = ad.matmul(ad.conj_t(eff_a), eff_a)
            prod_bb = ad.matmul(ad.conj_t(eff_b), eff_b)
            prod_ab = ad.matmul(ad.conj_t(eff_a), eff_b)
            deg = ad.segment_sum(ad.concat([prod_aa, prod_bb], axis=0), self.node_idx_2m, n)
        else:
            deg = ad.constant(np.zeros((n, d, d), dtype=np.complex128))
        scal = ad.inv_sqrt_psd_blocks(deg, cfg.clamp)
        norm_diag = ad.matmul(ad.matmul(scal, deg), scal)
        if m > 0:
            s_a = ad.take_rows(scal, self.first_idx)
            s_b = ad.take_rows(scal, self.second_idx)
            off_ab = ad.neg(ad.matmul(ad.matmul(s_a, prod_ab), s_b))
            off_ba = ad.neg(ad.matmul(ad.matmul(s_b, ad.conj_t(prod_ab)), s_a))
            vals = ad.concat([norm_diag, off_ab, off_ba], axis=0)
        else:
            vals = norm_diag
        return vals, deg

    def _apply_blocks(self, vals: ad.Var, x: ad.Var) -> ad.Var:
        """Block-sparse operator application: (n+2m, d, d) blocks times (nd, f)."""
        n, d = self.n, self.config.d
        f = x.value.shape[1]
        x3 = ad.reshape(x, (n, d, f))
        prods = ad.matmul(vals, ad.take_rows(x3, self.scat_cols))
        return ad.reshape(ad.segment_sum(prods, self.scat_rows, n), (n * d, f))

    def dense_from_blocks(self, vals: np.ndarray) -> np.ndarray:
        """Materialize (n+2m, d, d) operator blocks as a dense (nd, nd) matrix."""
        n, d = self.n, self.config.d
        grid = np.zeros((n, n, d, d), dtype=np.complex128)
        np.add.at(grid, (self.scat_rows, self.scat_cols), vals)
        return grid.transpose(0, 2, 1, 3).reshape(n * d, n * d)

    def forward(self, params: ModelParams, features: np.ndarray, *,
                training: bool = False, dropout_rng: np.random.Generator | None = None,
                dropout_masks: list[np.ndarray | None] | None = None,
                activation=ad.crelu, keep_laplacians: bool = False) -> ForwardCache:
        """Run the network; ``activation=None`` is the identity test hook.

        ``dropout_masks`` replays recorded masks instead of drawing fresh
        ones; both dropout sites (post-encode, pre-output) are listed in
        order.  ``keep_laplacians`` additionally materializes each layer's
        dense normalized Laplacian into the cache.
        """
        cfg = self.config
        n, d, f = self.n, cfg.d, cfg.hidden_channels
        pv = {name: ad.Var(arr) for name, arr in named_params(params).items()}
        cache = ForwardCache(param_vars=pv, logits=None)

        def dropped(var: ad.Var, site: int) -> ad.Var:
            if dropout_masks is not None:
                mask = dropout_masks[site]
            else:
                _, mask = dropout_apply(var.value, cfg.dropout, dropout_rng, training)
            cache.dropout_masks.append(mask)
            return var if mask is None else ad.mul(var, ad.constant(mask))

        x = ad.reshape(ad.add(ad.matmul(ad.constant(np.asarray(features, dtype=np.float64)),
                                        pv["w_in"]), pv["b_in"]), (n * d, f))
        x = dropped(ad.astype_complex(x), 0)
        x0 = x
        for t in range(cfg.num_layers):
            source = x if cfg.recompute_maps == "per_layer" else x0
            maps = self._learn_maps(pv, t, source)
            lap_blocks, deg = self._normalized_laplacian(maps)
            cache.layer_maps.append(np.stack([maps.value[:self.m], maps.value[self.m:]], axis=1))
            cache.layer_degrees.append(deg.value.copy())
            if keep_laplacians:
                cache.layer_laplacians.append(self.dense_from_blocks(lap_blocks.value))
            y = ad.reshape(ad.matmul(ad.astype_complex(pv[f"layer{t}.w1"]),
                                     ad.reshape(x, (n, d, f))), (n * d, f))
            z = ad.matmul(self._apply_blocks(lap_blocks, y),
                          ad.astype_complex(pv[f"layer{t}.w2"]))
            if activation is not None:
                z = activation(z)
            eps_col = ad.reshape(ad.take_rows(ad.tanh(pv[f"layer{t}.eps_raw"]),
                                              self.eps_tile_idx), (n * d, 1))
            x = ad.sub(ad.mul(ad.add_scalar(eps_col, 1.0), x), z)
        cache.final_stalks = x.value.copy()
        flat = ad.reshape(x, (n, d * f))
        unwound = dropped(ad.concat([ad.real(flat), ad.imag(flat)], axis=1), 1)
        cache.logits = ad.add(ad.matmul(unwound, pv["w_out"]), pv["b_out"])
        return cache

    def loss(self, params: ModelParams, features: np.ndarray, labels: np.ndarray,
             mask: np.ndarray, **forward_kwargs) -> ForwardCache:
        cache = self.forward(params, features, **forward_kwargs)
        cache.loss = ad.masked_softmax_cross_entropy(cache.logits, labels, mask)
        return cache

    def loss_and_grads(self, params: ModelParams, features: np.ndarray,
                       labels: np.ndarray, mask: np.ndarray, **forward_kwargs
                       ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        cache = self.loss(params, features, labels, mask, **forward_kwargs)
        loss_value = float(cache.loss.value)
        if not np.isfinite(loss_value):
            raise FloatingPointError(f"non-finite training loss {loss_value}")
        return loss_value, backward(cache), cache.logit_values

    def logits(self, params: ModelParams, features: np.ndarray) -> np.ndarray:
        """Evaluation-mode logits (no dropout)."""
        return self.forward(params, features, training=False).logit_values


def layer_forward(model: "SheafDiffusionModel", params: ModelParams, t: int,
                  x: np.ndarray, x0: np.ndarray | None = None,
                  activation=ad.crelu) -> tuple[np.ndarray, dict]:
    """One diffusion layer on a plain (n*d, f) complex array.

    Builds the layer's restriction maps (from ``x``, or from ``x0`` when the
    model runs in ``once`` mode), assembles the normalized Laplacian, and
    applies the residual update.  Returns the next stalk block plus the
    materialized maps, degree blocks, and dense operator for inspection.
    ``activation=None`` is the identity test hook.
    """
    pv = {name: ad.Var(arr) for name, arr in named_params(params).items()}
    x_var = ad.constant(np.asarray(x, dtype=np.complex128))
    source = x_var if x0 is None else ad.constant(np.asarray(x0, dtype=np.complex128))
    if model.config.recompute_maps == "per_layer":
        source = x_var
    maps = model._learn_maps(pv, t, source)
    lap_blocks, deg = model._normalized_laplacian(maps)
    n, d, f = model.n, model.config.d, model.config.hidden_channels
    y = ad.reshape(ad.matmul(ad.astype_complex(pv[f"layer{t}.w1"]),
                             ad.reshape(x_var, (n, d, f))), (n * d, f))
    z = ad.matmul(model._apply_blocks(lap_blocks, y), ad.astype_complex(pv[f"layer{t}.w2"]))
    if activation is not None:
        z = activation(z)
    eps_col = ad.reshape(ad.take_rows(ad.tanh(pv[f"layer{t}.eps_raw"]),
                                      model.eps_tile_idx), (n * d, 1))
    out = ad.sub(ad.mul(ad.add_scalar(eps_col, 1.0), x_var), z)
    info = {"maps": np.stack([maps.value[:model.m], maps.value[model.m:]], axis=1),
            "degree_blocks": deg.value.copy(),
            "laplacian": model.dense_from_blocks(lap_blocks.value)}
    return out.value, info


def learn_restriction_maps(x: np.ndarray, graph: DirectedGraph, phi: PhiParams,
                           map_class: MapClass, sheaf_act: str,
                           hidden_channels: int) -> np.ndarray:
    """Standalone map builder on plain arrays, shape (m, 2, d, d).

    ``x`` is the (n*d, f) stalk feature block whose real part feeds the map
    network; index [e, 0] is the edge's first endpoint.
    """
    d = x.shape[0] // graph.n
    cfg = ModelConfig(input_dim=1, num_classes=2, num_layers=1, d=d,
                      hidden_channels=hidden_channels, map_class=map_class,
                      sheaf_act=sheaf_act, phi_hidden=phi.w1.shape[1])
    model = SheafDiffusionModel(cfg, graph)
    pv = {"layer0.phi.w1": ad.Var(phi.w1), "layer0.phi.b1": ad.Var(phi.b1),
          "layer0.phi.w2": ad.Var(phi.w2), "layer0.phi.b2": ad.Var(phi.b2)}
    maps = model._learn_maps(pv, 0, ad.constant(np.asarray(x, dtype=np.complex128)))
    return np.stack([maps.value[:graph.m], maps.value[graph.m:]], axis=1)


# --- checkpoint format ---------------------------------------------------

_CHECKPOINT_MAGIC = "dsheaf-params 1"


def save_params(params: ModelParams, path) -> None:
    """Exact text checkpoint: name + shape header, hex-float values."""
    lines = [_CHECKPOINT_MAGIC]
    for name, arr in named_params(params).items():
        arr = np.asarray(arr, dtype=np.float64)
        header = " ".join([name, str(arr.ndim)] + [str(s) for s in arr.shape])
        lines.append(header)
        lines.append(" ".join(float(x).hex() for x in arr.reshape(-1)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    named: dict[str, np.ndarray] = {}
    pos = 1
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        fields = lines[pos].split()
        name, ndim = fields[0], int(fields[1])
        shape = tuple(int(s) for s in fields[2:2 + ndim])
        values = [float.fromhex(tok) for tok in lines[pos + 1].split()]
        named[name] = np.asarray(values, dtype=np.float64).reshape(shape)
        pos += 2
    return params_from_named(named)
