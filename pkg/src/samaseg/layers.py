"""Layer primitives: Linear, Conv2D (incl. depthwise and transpose),
GroupNorm, LayerNorm, adaptive average pooling, stable softmax.

Weights are initialized Kaiming-uniform style, uniform(+-sqrt(1/fan_in)),
norm scales to 1 and shifts to 0. Convolutions use the cross-correlation
convention (no kernel flip).
"""

from __future__ import annotations

import numpy as np

from .profiler import record_macs
from .tensor import Tensor, concat, stack, uniform


class Module:
    """Minimal parameter container; submodules discovered via attributes."""

    def named_parameters(self, prefix: str = ""):
        for name, val in vars(self).items():
            if isinstance(val, Tensor):
                if val.requires_grad:
                    yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def num_params(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self):
        for t in self.parameters():
            t.zero_grad()


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float32):
        bound = (1.0 / in_features) ** 0.5
        self.weight = uniform(rng, (out_features, in_features), bound, dtype)
        self.bias = uniform(rng, (out_features,), bound, dtype) if bias else None
        self.in_features = in_features
        self.out_features = out_features

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ValueError(f"linear expects trailing dim {self.in_features}, got {x.shape}")
        y = x @ self.weight.transpose(1, 0)
        if self.bias is not None:
            y = y + self.bias
        return y


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """Cross-correlation over [B,C,H,W] with weight [out,in/groups,kh,kw]."""
    b, c, h, w = x.shape
    out_ch, cg, kh, kw = weight.shape
    if c % groups or out_ch % groups or cg != c // groups:
        raise ValueError(f"conv group mismatch: in={c} out={out_ch} groups={groups} weight={weight.shape}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"conv output would be empty: input {h}x{w}, kernel {kh}x{kw}, "
                         f"stride {stride}, padding {padding}")
    xp = x.pad2d(padding, padding)

    if groups == c == out_ch and c > 1:
        # depthwise path: weighted sum of shifted slices
        parts = [xp[:, :, ky:ky + (oh - 1) * stride + 1:stride,
                      kx:kx + (ow - 1) * stride + 1:stride]
                 for ky in range(kh) for kx in range(kw)]
        patches = stack(parts, axis=0)                       # [kh*kw,B,C,OH,OW]
        wr = weight.transpose(2, 3, 1, 0).reshape(kh * kw, 1, c, 1, 1)
        y = (patches * wr).sum(axis=0)
        record_macs(b * c * kh * kw * oh * ow)
    else:
        outs = []
        for g in range(groups):
            xg = xp[:, g * cg:(g + 1) * cg] if groups > 1 else xp
            wg = weight[g * (out_ch // groups):(g + 1) * (out_ch // groups)]
            parts = [xg[:, :, ky:ky + (oh - 1) * stride + 1:stride,
                          kx:kx + (ow - 1) * stride + 1:stride]
                     for ky in range(kh) for kx in range(kw)]
            patches = stack(parts, axis=2)                   # [B,Cg,kh*kw,OH,OW]
            cols = patches.reshape(b, cg * kh * kw, oh * ow).transpose(0, 2, 1)
            yg = cols @ wg.reshape(out_ch // groups, cg * kh * kw).transpose(1, 0)
            outs.append(yg.transpose(0, 2, 1).reshape(b, out_ch // groups, oh, ow))
        y = outs[0] if groups == 1 else concat(outs, axis=1)
    if bias is not None:
        y = y + bias.reshape(1, out_ch, 1, 1)
    return y


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, groups: int = 1,
                 bias: bool = True, dtype=np.float32):
        fan_in = (in_ch // groups) * kernel * kernel
        bound = (1.0 / fan_in) ** 0.5
        self.weight = uniform(rng, (out_ch, in_ch // groups, kernel, kernel), bound, dtype)
        self.bias = uniform(rng, (out_ch,), bound, dtype) if bias else None
        self.stride = stride
        self.padding = padding
        self.groups = groups

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class ConvTranspose2d(Module):
    """Transpose convolution; adjoint of Conv2d with the same geometry.

    Weight layout is [in, out, kh, kw]; output extent (H-1)*s - 2p + k.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, bias: bool = True, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        bound = (1.0 / fan_in) ** 0.5
        self.weight = uniform(rng, (in_ch, out_ch, kernel, kernel), bound, dtype)
        self.bias = uniform(rng, (out_ch,), bound, dtype) if bias else None
        self.stride = stride
        self.padding = padding
        self.kernel = kernel

    def __call__(self, x: Tensor) -> Tensor:
        k, s, p = self.kernel, self.stride, self.padding
        if k - 1 - p < 0:
            raise ValueError("transpose conv requires padding <= kernel-1")
        xd = x.dilate2d(s, s)
        w_eq = self.weight.flip((2, 3)).transpose(1, 0, 2, 3)
        y = conv2d(xd, w_eq, None, stride=1, padding=k - 1 - p, groups=1)
        if self.bias is not None:
            y = y + self.bias.reshape(1, -1, 1, 1)
        return y


class GroupNorm(Module):
    def __init__(self, channels: int, num_groups: int | None = None,
                 eps: float = 1e-5, dtype=np.float32):
        if num_groups is None:
            num_groups = 8 if channels >= 8 else channels
        if channels % num_groups:
            raise ValueError(f"channels {channels} not divisible by groups {num_groups}")
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.num_groups = num_groups
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        b, c = x.shape[0], x.shape[1]
        spatial = int(np.prod(x.shape[2:])) if x.ndim > 2 else 1
        g = self.num_groups
        xg = x.reshape(b, g, (c // g) * spatial)
        mu = xg.mean(axis=2, keepdims=True)
        centered = xg - mu
        var = (centered * centered).mean(axis=2, keepdims=True)
        norm = centered / (var + self.eps).sqrt()
        norm = norm.reshape(*x.shape)
        shape = (1, c) + (1,) * (x.ndim - 2)
        return norm * self.gamma.reshape(shape) + self.beta.reshape(shape)


class LayerNorm(Module):
    """Normalizes over the channel axis (axis 1) independently per position."""

    def __init__(self, channels: int, eps: float = 1e-5, dtype=np.float32):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.eps = eps
        self.channels = channels

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=1, keepdims=True)
        norm = centered / (var + self.eps).sqrt()
        shape = (1, self.channels) + (1,) * (x.ndim - 2)
        return norm * self.gamma.reshape(shape) + self.beta.reshape(shape)


def adaptive_avg_pool2d(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Average pooling onto an out_h x out_w grid, torch-style cell edges."""
    h, w = x.shape[-2], x.shape[-1]
    rows = []
    for i in range(out_h):
        h0, h1 = (i * h) // out_h, -(-((i + 1) * h) // out_h)
        cells = []
        for j in range(out_w):
            w0, w1 = (j * w) // out_w, -(-((j + 1) * w) // out_w)
            cells.append(x[..., h0:h1, w0:w1].mean(axis=(-2, -1), keepdims=True))
        rows.append(concat(cells, axis=-1))
    return concat(rows, axis=-2)


def softmax_lastdim(x: Tensor) -> Tensor:
    m = x.max_const(axis=-1, keepdims=True)
    e = (x - Tensor(m)).exp()
    return e / e.sum(axis=-1, keepdims=True)


def silu(x: Tensor) -> Tensor:
    return x.silu()
