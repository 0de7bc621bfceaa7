"""Two-channel regression network over WPD images.

Per-channel conv stems feed a channel-concatenated linear embedding, four
hierarchical stages of windowed multi-head self-attention (alternating
plain and cyclically shifted partitions, with learned relative-position
bias) separated by 2x2 patch merging, then global average pooling and a
small fully connected head that emits one unbounded RUL estimate.

Shapes are derivable from the config alone and validated at construction,
so a mismatched (input side, window, depths) combination fails fast. The
"paper" preset is the full-scale architecture (final stage width 768); the
"desk" preset is small enough to train on a laptop CPU in minutes.
"""

import logging
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigMismatch, IndivisibleGrid, OddGrid
from .features import IMAGE_SIDE

logger = logging.getLogger(__name__)

MASK_OFF = -1e30  # pre-softmax mask value; exp() underflows to exactly 0


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; stage i has width embed_dim_base * 2^i."""

    embed_dim_base: int = 96
    depths: tuple = (2, 2, 6, 2)
    heads: tuple = (3, 6, 12, 24)
    window_size: int = 4
    mlp_ratio: float = 4.0
    dropout_p: float = 0.3
    conv_channels: int = 32
    input_side: int = 64
    preset: str = "custom"

    def __post_init__(self):
        if len(self.depths) != 4 or len(self.heads) != 4:
            raise ConfigMismatch("depths and heads must each have 4 entries")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigMismatch("dropout_p must be in [0, 1)")
        if self.input_side % 2 or (self.input_side // 2) % 8:
            raise ConfigMismatch(
                f"input_side {self.input_side} must embed to a grid divisible by 8")
        if IMAGE_SIDE % self.input_side:
            raise ConfigMismatch(
                f"input_side {self.input_side} must divide the {IMAGE_SIDE}-pixel image")
        for i in range(4):
            if self.stage_dim(i) % self.heads[i]:
                raise ConfigMismatch(
                    f"stage {i}: heads {self.heads[i]} must divide dim {self.stage_dim(i)}")
            side = self.stage_side(i)
            if side % self.stage_window(i):
                raise IndivisibleGrid(
                    f"stage {i}: window {self.stage_window(i)} must divide grid side {side}")

    def stage_dim(self, i: int) -> int:
        return self.embed_dim_base * (1 << i)

    def stage_side(self, i: int) -> int:
        return (self.input_side // 2) >> i

    def stage_window(self, i: int) -> int:
        """Window clamped to the grid side, so tiny grids use one window."""
        return min(self.window_size, self.stage_side(i))

    @property
    def final_dim(self) -> int:
        return self.stage_dim(3)

    @property
    def head_hidden(self):
        return (self.final_dim // 2, self.final_dim // 4)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["depths"] = tuple(d["depths"])
        d["heads"] = tuple(d["heads"])
        return cls(**d)


def paper_config() -> ModelConfig:
    """Full-scale preset: base width 96, final width 768, heads [3,6,12,24]."""
    return ModelConfig(embed_dim_base=96, depths=(2, 2, 6, 2), heads=(3, 6, 12, 24),
                       window_size=4, input_side=64, preset="paper")


def desk_config() -> ModelConfig:
    """Laptop-scale preset: base width 16, one block per stage, 16x16 grid."""
    return ModelConfig(embed_dim_base=16, depths=(1, 1, 1, 1), heads=(1, 2, 4, 8),
                       window_size=4, input_side=32, preset="desk")


def config_from_preset(name: str) -> ModelConfig:
    presets = {"paper": paper_config, "desk": desk_config}
    if name not in presets:
        raise ConfigMismatch(f"unknown preset {name!r}; expected paper or desk")
    return presets[name]()


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass
class ModelParams:
    tensors: dict
    init_seed: int = 0

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def param_count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None


@lru_cache(maxsize=8)
def expected_shapes(cfg: ModelConfig) -> dict:
    """Name -> shape map for every learnable tensor, derived from the config."""
    cc, c = cfg.conv_channels, cfg.embed_dim_base
    shapes = {}
    for ch in ("hor", "ver"):
        shapes[f"stem.{ch}.w"] = (cc, 1, 3, 3)
        shapes[f"stem.{ch}.b"] = (cc,)
    shapes["embed.w"] = (2 * cc, c)
    shapes["embed.b"] = (c,)
    for i in range(4):
        dim = cfg.stage_dim(i)
        win = cfg.stage_window(i)
        hidden = int(dim * cfg.mlp_ratio)
        for j in range(cfg.depths[i]):
            p = f"stage{i}.block{j}"
            shapes[f"{p}.norm1.g"] = (dim,)
            shapes[f"{p}.norm1.b"] = (dim,)
            for proj in ("q", "k", "v", "proj"):
                shapes[f"{p}.attn.{proj}.w"] = (dim, dim)
                shapes[f"{p}.attn.{proj}.b"] = (dim,)
            shapes[f"{p}.attn.relpos"] = ((2 * win - 1) ** 2, cfg.heads[i])
            shapes[f"{p}.norm2.g"] = (dim,)
            shapes[f"{p}.norm2.b"] = (dim,)
            shapes[f"{p}.mlp.fc1.w"] = (dim, hidden)
            shapes[f"{p}.mlp.fc1.b"] = (hidden,)
            shapes[f"{p}.mlp.fc2.w"] = (hidden, dim)
            shapes[f"{p}.mlp.fc2.b"] = (dim,)
        if i < 3:
            shapes[f"merge{i}.w"] = (4 * dim, 2 * dim)
    d = cfg.final_dim
    h1, h2 = cfg.head_hidden
    shapes["head.fc1.w"] = (d, h1)
    shapes["head.fc1.b"] = (h1,)
    shapes["head.fc2.w"] = (h1, h2)
    shapes["head.fc2.b"] = (h2,)
    shapes["head.out.w"] = (h2, 1)
    shapes["head.out.b"] = (1,)
    return shapes


def expected_param_count(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in expected_shapes(cfg).values())


def _trunc_normal(rng, shape, std=0.02):
    x = rng.normal(0.0, std, size=shape)
    bad = np.abs(x) > 2 * std
    while bad.any():
        x[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(x) > 2 * std
    return x


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Seeded init chosen for healthy signal propagation at small scale.

    Residual-branch projections (attention q/k/v/proj, MLP, position
    bias) start truncated-normal with std 0.02 so every block opens near
    the identity. The spine that actually carries the signal gets
    unit-gain scales instead: He for the conv stems and head hidden
    layers (ReLU), 1/sqrt(fan_in) for the patch embedding and merging
    reductions. The final layer starts at zero so predictions begin
    exactly constant and prediction variance can only grow along
    loss-reducing directions; otherwise the early shrink-the-noise phase
    collapses the backbone into emitting input-independent features at
    desk-scale step counts.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in expected_shapes(cfg).items():
        if name.endswith("norm.g") or name.endswith(".g"):
            data = np.ones(shape)
        elif name.endswith(".b"):
            data = np.zeros(shape)
        elif name == "head.out.w":
            data = np.zeros(shape)
        elif name.startswith(("stem.", "head.")):
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif name == "embed.w" or name.startswith("merge"):
            data = rng.normal(0.0, np.sqrt(1.0 / shape[0]), size=shape)
        else:
            data = _trunc_normal(rng, shape)
        tensors[name] = Tensor(data, requires_grad=True)
    params = ModelParams(tensors=tensors, init_seed=seed)
    count = params.param_count()
    if count != expected_param_count(cfg):
        raise ConfigMismatch("parameter census does not match config")
    logger.info("initialized %s preset: %d parameters", cfg.preset, count)
    return params


def validate_params(params: ModelParams, cfg: ModelConfig):
    expected = expected_shapes(cfg)
    actual = {k: v.shape for k, v in params.tensors.items()}
    if actual != expected:
        missing = expected.keys() - actual.keys()
        extra = actual.keys() - expected.keys()
        raise ConfigMismatch(
            f"params do not match config (missing={sorted(missing)[:3]}, "
            f"extra={sorted(extra)[:3]})")


# ---------------------------------------------------------------------------
# Geometry helpers (plain numpy, gradient-free)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def relative_position_index(window: int) -> np.ndarray:
    """Flat (T*T,) index into the (2w-1)^2 relative-position bias table."""
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window),
                                  indexing="ij"))
    flat = coords.reshape(2, -1)
    rel = (flat[:, :, None] - flat[:, None, :]).transpose(1, 2, 0) + window - 1
    return np.ascontiguousarray(
        (rel[..., 0] * (2 * window - 1) + rel[..., 1]).reshape(-1))


@lru_cache(maxsize=32)
def shifted_window_mask(side: int, window: int) -> np.ndarray:
    """(nW, T, T) additive mask isolating wrapped regions after a cyclic shift."""
    shift = window // 2
    region = np.zeros((side, side))
    tag = 0
    for rows in (slice(0, side - window), slice(side - window, side - shift),
                 slice(side - shift, side)):
        for cols in (slice(0, side - window), slice(side - window, side - shift),
                     slice(side - shift, side)):
            region[rows, cols] = tag
            tag += 1
    win = region.reshape(side // window, window, side // window, window)
    win = win.transpose(0, 2, 1, 3).reshape(-1, window * window)
    different = win[:, :, None] != win[:, None, :]
    return np.where(different, MASK_OFF, 0.0)


def _partition(x: Tensor, n: int, side: int, window: int, dim: int) -> Tensor:
    """(N, side, side, C) -> (N * nW, window^2, C)."""
    g = side // window
    x = ad.reshape(x, (n, g, window, g, window, dim))
    x = ad.transpose(x, (0, 1, 3, 2, 4, 5))
    return ad.reshape(x, (n * g * g, window * window, dim))


def _unpartition(x: Tensor, n: int, side: int, window: int, dim: int) -> Tensor:
    g = side // window
    x = ad.reshape(x, (n, g, g, window, window, dim))
    x = ad.transpose(x, (0, 1, 3, 2, 4, 5))
    return ad.reshape(x, (n, side, side, dim))


def _linear(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    return ad.add(ad.matmul(x, params[f"{prefix}.w"]), params[f"{prefix}.b"])


# ---------------------------------------------------------------------------
# Network pieces
# ---------------------------------------------------------------------------

def conv_stem(x: Tensor, params: ModelParams, channel: str) -> Tensor:
    """3x3 conv (pad 1) -> ReLU -> 2x2 max pool; halves the spatial side."""
    y = ad.conv2d(x, params[f"stem.{channel}.w"], params[f"stem.{channel}.b"], pad=1)
    return ad.maxpool2d(ad.relu(y), 2, 2)


def fuse(hor_feat: Tensor, ver_feat: Tensor, params: ModelParams,
         cfg: ModelConfig) -> Tensor:
    """Concatenate stem outputs on channels and embed to tokens.

    Output is (N, side, side, embed_dim_base) on the side/2 token grid.
    """
    if hor_feat.shape != ver_feat.shape:
        raise ConfigMismatch(
            f"stem outputs differ: {hor_feat.shape} vs {ver_feat.shape}")
    fused = ad.concat([hor_feat, ver_feat], axis=1)
    tokens = ad.transpose(fused, (0, 2, 3, 1))
    return _linear(tokens, params, "embed")


def window_attention(tokens: Tensor, params: ModelParams, prefix: str,
                     heads: int, window: int, shifted: bool) -> Tensor:
    """Multi-head self-attention within (optionally shifted) windows.

    tokens is (N, side, side, C). When shifted, the grid is cyclically
    rolled by window/2 and wrapped regions are masked off (MASK_OFF
    pre-softmax), then rolled back afterwards.
    """
    n, side, _, dim = tokens.shape
    if side % window:
        raise IndivisibleGrid(f"grid side {side} not divisible by window {window}")
    head_dim = dim // heads
    scale = 1.0 / np.sqrt(head_dim)
    shift = window // 2 if shifted else 0

    x = ad.roll(tokens, (-shift, -shift), (1, 2)) if shift else tokens
    x = _partition(x, n, side, window, dim)
    batch, t = x.shape[0], window * window

    def split_heads(proj):
        y = _linear(x, params, f"{prefix}.{proj}")
        y = ad.reshape(y, (batch, t, heads, head_dim))
        return ad.transpose(y, (0, 2, 1, 3))

    q, k, v = split_heads("q"), split_heads("k"), split_heads("v")
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), scale)

    bias = ad.gather_rows(params[f"{prefix}.relpos"], relative_position_index(window))
    bias = ad.transpose(ad.reshape(bias, (t, t, heads)), (2, 0, 1))
    scores = ad.add(scores, ad.reshape(bias, (1, heads, t, t)))

    if shift:
        mask = shifted_window_mask(side, window)
        scores = ad.add(scores, np.tile(mask, (n, 1, 1))[:, None, :, :])

    attn = ad.softmax(scores, axis=-1)
    out = ad.matmul(attn, v)
    out = ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (batch, t, dim))
    out = _linear(out, params, f"{prefix}.proj")
    out = _unpartition(out, n, side, window, dim)
    return ad.roll(out, (shift, shift), (1, 2)) if shift else out


def patch_merging(tokens: Tensor, params: ModelParams, prefix: str) -> Tensor:
    """Group 2x2 token neighborhoods (4C) and reduce linearly to 2C."""
    n, side, _, dim = tokens.shape
    if side % 2:
        raise OddGrid(f"patch merging needs an even grid side, got {side}")
    half = side // 2
    x = ad.reshape(tokens, (n, half, 2, half, 2, dim))
    x = ad.transpose(x, (0, 1, 3, 2, 4, 5))
    x = ad.reshape(x, (n, half, half, 4 * dim))
    return ad.matmul(x, params[f"{prefix}.w"])


def _block(tokens: Tensor, params: ModelParams, prefix: str, heads: int,
           window: int, shifted: bool) -> Tensor:
    y = ad.layer_norm(tokens, params[f"{prefix}.norm1.g"], params[f"{prefix}.norm1.b"])
    y = window_attention(y, params, f"{prefix}.attn", heads, window, shifted)
    tokens = ad.add(tokens, y)
    y = ad.layer_norm(tokens, params[f"{prefix}.norm2.g"], params[f"{prefix}.norm2.b"])
    y = ad.relu(_linear(y, params, f"{prefix}.mlp.fc1"))
    y = _linear(y, params, f"{prefix}.mlp.fc2")
    return ad.add(tokens, y)


def prepare_images(pixel_arrays, input_side: int) -> np.ndarray:
    """Stack images to (N, 1, S, S) float64, block-max reducing 64 -> S.

    Max (not mean) pooling: wavelet-packet pixels oscillate around
    mid-gray, so averaging neighbors cancels the very texture that
    carries subband energy, while the block maximum keeps its envelope.
    """
    x = np.asarray(np.stack(pixel_arrays), dtype=np.float64)[:, None, :, :]
    factor = x.shape[-1] // input_side
    if factor > 1:
        n = x.shape[0]
        x = x.reshape(n, 1, input_side, factor, input_side, factor).max(axis=(3, 5))
    return x


def forward_batch(params: ModelParams, cfg: ModelConfig, hor: np.ndarray,
                  ver: np.ndarray, training: bool = False, rng=None) -> Tensor:
    """Full network on prepared (N,1,S,S) inputs; returns predictions (N,).

    With training=False (dropout off) the output is a pure function of the
    inputs and parameters. Predictions are not clamped to [0, 1].
    """
    validate_params(params, cfg)
    expected = (1, cfg.input_side, cfg.input_side)
    if hor.shape[1:] != expected or ver.shape[1:] != expected:
        raise ConfigMismatch(
            f"inputs must be (N,{','.join(map(str, expected))}); "
            f"got {hor.shape} / {ver.shape} (run prepare_images first)")
    n = hor.shape[0]
    tokens = fuse(conv_stem(Tensor(hor), params, "hor"),
                  conv_stem(Tensor(ver), params, "ver"), params, cfg)
    for i in range(4):
        window = cfg.stage_window(i)
        can_shift = window < cfg.stage_side(i)
        for j in range(cfg.depths[i]):
            tokens = _block(tokens, params, f"stage{i}.block{j}", cfg.heads[i],
                            window, shifted=(j % 2 == 1 and can_shift))
        if i < 3:
            tokens = patch_merging(tokens, params, f"merge{i}")
    side = cfg.stage_side(3)
    pooled = ad.mean(ad.reshape(tokens, (n, side * side, cfg.final_dim)), axis=1)

    h = ad.relu(_linear(pooled, params, "head.fc1"))
    h = ad.dropout(h, cfg.dropout_p, training, rng)
    h = ad.relu(_linear(h, params, "head.fc2"))
    h = ad.dropout(h, cfg.dropout_p, training, rng)
    out = _linear(h, params, "head.out")
    return ad.reshape(out, (n,))


def forward(sample, params: ModelParams, cfg: ModelConfig,
            training: bool = False, rng=None) -> float:
    """Predicted RUL for one LabeledSample."""
    hor = prepare_images([sample.hor.pixels], cfg.input_side)
    ver = prepare_images([sample.ver.pixels], cfg.input_side)
    return float(forward_batch(params, cfg, hor, ver, training, rng).data[0])


def predict_batch(params: ModelParams, cfg: ModelConfig, samples,
                  batch_size: int = 64) -> np.ndarray:
    """Deterministic (dropout-off) predictions for a list of samples."""
    preds = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        hor = prepare_images([s.hor.pixels for s in chunk], cfg.input_side)
        ver = prepare_images([s.ver.pixels for s in chunk], cfg.input_side)
        preds.append(forward_batch(params, cfg, hor, ver, training=False).data)
    return np.concatenate(preds)
