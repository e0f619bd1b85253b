"""DQN / FCQN / AFCQN value networks built from :mod:`gridexplore.nn.layers`.

Shared encoder: strided same-padded convolutions with leaky ReLU, total
stride ``NetConfig.stride``.

* FCQN: 1x1 conv on the encoder features gives the point-action advantage
  map; global max-pool -> FC -> FC gives (terminal advantage, state value).
* AFCQN: FCQN plus a decoder of two transposed convolutions producing
  3-class segmentation logits at input resolution.
* DQN: encoder -> flatten -> FC -> FC producing Q directly; the input size is
  fixed at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import layers as L

VARIANTS = ("DQN", "FCQN", "AFCQN")
N_SEG = 3


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    enc_channels: tuple = (16, 32, 32)
    enc_kernels: tuple = (5, 3, 3)
    enc_strides: tuple = (2, 2, 2)
    fc_hidden: int = 32
    dec_hidden: int = 16
    dqn_hidden: int = 64
    in_channels: int = 3

    @property
    def stride(self) -> int:
        return int(np.prod(self.enc_strides))

    def to_tokens(self) -> str:
        def t(v):
            return ",".join(map(str, v)) if isinstance(v, tuple) else str(v)
        return " ".join(f"{k}={t(getattr(self, k))}" for k in self.__dataclass_fields__)

    @classmethod
    def from_tokens(cls, tokens) -> "NetConfig":
        kw = {}
        for tok in tokens:
            k, v = tok.split("=", 1)
            if k not in cls.__dataclass_fields__:
                raise ValueError(f"unknown network field {k!r}")
            kw[k] = tuple(int(p) for p in v.split(",")) if "," in v or k.startswith("enc_") else int(v)
        return cls(**kw)


@dataclass
class NetworkParams:
    variant: str
    tensors: dict
    config: NetConfig = field(default_factory=NetConfig)
    input_hw: tuple | None = None  # DQN only

    @property
    def stride(self) -> int:
        return self.config.stride

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def copy(self) -> "NetworkParams":
        return replace(self, tensors={k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "NetworkParams":
        return replace(self, tensors={k: v.astype(dtype) for k, v in self.tensors.items()})

    def n_params(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def action_count(self, h: int, w: int) -> int:
        return (h // self.stride) * (w // self.stride) + 1


@dataclass
class NetOutput:
    adv_map: np.ndarray | None = None       # (N, H/s, W/s)
    adv_terminal: np.ndarray | None = None  # (N,)
    state_value: np.ndarray | None = None   # (N,)
    seg_logits: np.ndarray | None = None    # (N, 3, H, W)
    q_direct: np.ndarray | None = None      # (N, |A|), DQN only


def _shapes(variant, cfg: NetConfig, input_hw=None):
    shapes = {}
    cin = cfg.in_channels
    for i, (c, k) in enumerate(zip(cfg.enc_channels, cfg.enc_kernels)):
        shapes[f"enc{i}.w"] = (c, cin, k, k)
        shapes[f"enc{i}.b"] = (c,)
        cin = c
    if variant == "DQN":
        h, w = input_hw
        s = cfg.stride
        flat = cin * (h // s) * (w // s)
        n_actions = (h // s) * (w // s) + 1
        shapes["fc0.w"] = (flat, cfg.dqn_hidden)
        shapes["fc0.b"] = (cfg.dqn_hidden,)
        shapes["fc1.w"] = (cfg.dqn_hidden, n_actions)
        shapes["fc1.b"] = (n_actions,)
        return shapes
    shapes["adv.w"] = (1, cin, 1, 1)
    shapes["adv.b"] = (1,)
    shapes["fc0.w"] = (cin, cfg.fc_hidden)
    shapes["fc0.b"] = (cfg.fc_hidden,)
    shapes["fc1.w"] = (cfg.fc_hidden, 2)
    shapes["fc1.b"] = (2,)
    if variant == "AFCQN":
        if len(cfg.enc_strides) != 3 or cfg.stride != 8:
            raise ValueError("the AFCQN decoder upsamples by exactly 8")
        shapes["dec0.w"] = (cin, cfg.dec_hidden, 8, 8)
        shapes["dec0.b"] = (cfg.dec_hidden,)
        shapes["dec1.w"] = (cfg.dec_hidden, N_SEG, 4, 4)
        shapes["dec1.b"] = (N_SEG,)
    return shapes


# transposed-conv (stride, pad) for the two decoder layers: x4 then x2
_DEC = ((4, 2), (2, 1))


def init_params(variant: str, rng: np.random.Generator, config: NetConfig | None = None,
                input_hw=None, dtype=np.float32) -> NetworkParams:
    """Fan-in scaled uniform weights, zero biases."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    cfg = config or NetConfig()
    if variant == "DQN":
        if input_hw is None:
            raise ValueError("DQN needs a fixed input size")
        input_hw = tuple(int(v) for v in input_hw)
        if input_hw[0] % cfg.stride or input_hw[1] % cfg.stride:
            raise ShapeMismatch(f"input {input_hw} not divisible by stride {cfg.stride}")
    else:
        input_hw = None
    tensors = {}
    for name, shape in _shapes(variant, cfg, input_hw).items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
            continue
        if name.startswith("dec"):
            fan_in = shape[0] * shape[2] * shape[3] // 4
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
        else:
            fan_in = shape[0]
        bound = np.sqrt(6.0 / fan_in)
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return NetworkParams(variant, tensors, cfg, input_hw)


def check_input(params: NetworkParams, x: np.ndarray) -> None:
    if x.ndim != 4 or x.shape[1] != params.config.in_channels:
        raise ShapeMismatch(f"expected (N, {params.config.in_channels}, H, W) input, got {x.shape}")
    h, w = x.shape[2:]
    s = params.stride
    if h % s or w % s:
        raise ShapeMismatch(f"input {h}x{w} not divisible by stride {s}")
    if params.variant == "DQN" and (h, w) != params.input_hw:
        raise ShapeMismatch(f"DQN was built for {params.input_hw}, got {(h, w)}")


def forward(params: NetworkParams, x: np.ndarray):
    """Run the network on a batch ``x`` of shape (N, 3, H, W).

    Returns ``(NetOutput, cache)``; the cache feeds :func:`backward`.
    """
    if x.ndim == 3:
        x = x[None]
    check_input(params, x)
    p = params.tensors
    cfg = params.config
    x = x.astype(params.dtype, copy=False)
    cache = {}
    h = x
    for i, s in enumerate(cfg.enc_strides):
        z, cache[f"enc{i}"] = L.conv2d_forward(h, p[f"enc{i}.w"], p[f"enc{i}.b"], s)
        h, cache[f"act{i}"] = L.leaky_relu_forward(z)
    feat = h
    n = x.shape[0]
    out = NetOutput()
    if params.variant == "DQN":
        flat = feat.reshape(n, -1)
        z, cache["fc0"] = L.linear_forward(flat, p["fc0.w"], p["fc0.b"])
        a, cache["fc0_act"] = L.leaky_relu_forward(z)
        out.q_direct, cache["fc1"] = L.linear_forward(a, p["fc1.w"], p["fc1.b"])
        cache["feat_shape"] = feat.shape
        return out, cache

    adv, cache["adv"] = L.conv2d_forward(feat, p["adv.w"], p["adv.b"], 1)
    out.adv_map = adv[:, 0]
    pooled, cache["pool"] = L.global_maxpool_forward(feat)
    z, cache["fc0"] = L.linear_forward(pooled, p["fc0.w"], p["fc0.b"])
    a, cache["fc0_act"] = L.leaky_relu_forward(z)
    head, cache["fc1"] = L.linear_forward(a, p["fc1.w"], p["fc1.b"])
    out.adv_terminal = head[:, 0]
    out.state_value = head[:, 1]

    if params.variant == "AFCQN":
        (s0, p0), (s1, p1) = _DEC
        z, cache["dec0"] = L.deconv2d_forward(feat, p["dec0.w"], p["dec0.b"], s0, p0)
        a, cache["dec0_act"] = L.leaky_relu_forward(z)
        out.seg_logits, cache["dec1"] = L.deconv2d_forward(a, p["dec1.w"], p["dec1.b"], s1, p1)
    return out, cache


def combine_dueling(out: NetOutput) -> np.ndarray:
    """Q for every action, terminal last. DQN outputs pass straight through."""
    if out.q_direct is not None:
        return out.q_direct
    return L.dueling_forward(out.adv_map, out.adv_terminal, out.state_value)


def q_values(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    out, _ = forward(params, x)
    return combine_dueling(out)


@dataclass
class OutputGrads:
    """Loss gradients with respect to the network outputs.

    ``d_q`` is with respect to the combined Q vector; it is routed through the
    dueling combination for FCQN/AFCQN. ``seg_encoder_scale`` multiplies the
    segmentation gradient where it enters the shared encoder.
    """
    d_q: np.ndarray | None = None
    d_adv_map: np.ndarray | None = None
    d_adv_terminal: np.ndarray | None = None
    d_value: np.ndarray | None = None
    d_seg: np.ndarray | None = None
    seg_encoder_scale: float = 1.0


def backward(params: NetworkParams, cache: dict, grads: OutputGrads) -> dict:
    """Gradients for every parameter tensor (zeros where no signal flows)."""
    p = params.tensors
    cfg = params.config
    g = {k: np.zeros_like(v) for k, v in p.items()}
    dfeat = None

    if params.variant == "DQN":
        if grads.d_q is not None:
            da, g["fc1.w"], g["fc1.b"] = L.linear_backward(grads.d_q, p["fc1.w"], cache["fc1"])
            dz = L.leaky_relu_backward(da, cache["fc0_act"])
            dflat, g["fc0.w"], g["fc0.b"] = L.linear_backward(dz, p["fc0.w"], cache["fc0"])
            dfeat = dflat.reshape(cache["feat_shape"])
    else:
        feat_shape = cache["pool"][0]
        map_shape = (feat_shape[0], feat_shape[2], feat_shape[3])
        d_adv_map = _zeros_if_none(grads.d_adv_map, map_shape, params.dtype)
        d_term = _zeros_if_none(grads.d_adv_terminal, (feat_shape[0],), params.dtype)
        d_val = _zeros_if_none(grads.d_value, (feat_shape[0],), params.dtype)
        if grads.d_q is not None:
            dm, dt, dv = L.dueling_backward(grads.d_q, map_shape)
            d_adv_map = d_adv_map + dm.astype(params.dtype, copy=False)
            d_term = d_term + dt.astype(params.dtype, copy=False)
            d_val = d_val + dv.astype(params.dtype, copy=False)
        dadv = d_adv_map[:, None]
        dfeat_a, g["adv.w"], g["adv.b"] = L.conv2d_backward(dadv, p["adv.w"], cache["adv"])
        dhead = np.stack([d_term, d_val], axis=1)
        da, g["fc1.w"], g["fc1.b"] = L.linear_backward(dhead, p["fc1.w"], cache["fc1"])
        dz = L.leaky_relu_backward(da, cache["fc0_act"])
        dpooled, g["fc0.w"], g["fc0.b"] = L.linear_backward(dz, p["fc0.w"], cache["fc0"])
        dfeat = dfeat_a + L.global_maxpool_backward(dpooled, cache["pool"])
        if params.variant == "AFCQN" and grads.d_seg is not None:
            da, g["dec1.w"], g["dec1.b"] = L.deconv2d_backward(grads.d_seg, p["dec1.w"], cache["dec1"])
            dz = L.leaky_relu_backward(da, cache["dec0_act"])
            dfeat_s, g["dec0.w"], g["dec0.b"] = L.deconv2d_backward(dz, p["dec0.w"], cache["dec0"])
            dfeat = dfeat + grads.seg_encoder_scale * dfeat_s

    if dfeat is None:
        return g
    dh = dfeat
    for i in reversed(range(len(cfg.enc_strides))):
        dz = L.leaky_relu_backward(dh, cache[f"act{i}"])
        dh, g[f"enc{i}.w"], g[f"enc{i}.b"] = L.conv2d_backward(dz, p[f"enc{i}.w"], cache[f"enc{i}"])
    return g


def _zeros_if_none(a, shape, dtype):
    return np.zeros(shape, dtype=dtype) if a is None else a
