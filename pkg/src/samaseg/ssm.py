"""Selective 1D state-space scan: input-dependent diagonal linear
recurrence with zero-order-hold discretization, linear in sequence length.

Per channel c and step t:

    delta_t = softplus(proj_delta(x_t))
    h_t     = exp(delta_t * A) * h_{t-1} + delta_t * B(x_t) * x_{t,c}
    y_{t,c} = <C(x_t), h_t> + D_c * x_{t,c}

with A = -exp(A_log) strictly negative and h_0 = 0. A `static` mode
freezes delta/B/C as learned input-independent parameters.
"""

from __future__ import annotations

import numpy as np

from .layers import Linear, Module
from .profiler import record_macs
from .tensor import Tensor, stack


class SelectiveSsm(Module):
    def __init__(self, channels: int, state_size: int, rng: np.random.Generator,
                 static: bool = False, dtype=np.float32):
        self.channels = channels
        self.state_size = state_size
        self.static = static
        # S4D-real style init: A = -(1..N) per channel
        a0 = np.log(np.arange(1, state_size + 1, dtype=np.float64))
        self.a_log = Tensor(np.tile(a0, (channels, 1)).astype(dtype), requires_grad=True)
        self.d_skip = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        if static:
            self.delta_p = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
            self.b_p = Tensor(np.full(state_size, 1.0, dtype=dtype), requires_grad=True)
            self.c_p = Tensor(np.full(state_size, 1.0, dtype=dtype), requires_grad=True)
        else:
            self.proj_delta = Linear(channels, channels, rng, dtype=dtype)
            self.proj_b = Linear(channels, state_size, rng, dtype=dtype)
            self.proj_c = Linear(channels, state_size, rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        """x: [B,L,C] -> [B,L,C], causal left-to-right scan."""
        b, l, c = x.shape
        if l < 1:
            raise ValueError("selective scan requires a nonempty sequence")
        n = self.state_size

        if self.static:
            delta = self.delta_p.softplus().reshape(1, 1, c) * Tensor(np.ones((b, l, 1), dtype=x.dtype))
            bm = self.b_p.reshape(1, 1, n) * Tensor(np.ones((b, l, 1), dtype=x.dtype))
            cm = self.c_p.reshape(1, 1, n) * Tensor(np.ones((b, l, 1), dtype=x.dtype))
        else:
            delta = self.proj_delta(x).softplus()            # [B,L,C]
            bm = self.proj_b(x)                              # [B,L,N]
            cm = self.proj_c(x)                              # [B,L,N]

        a = -self.a_log.exp()                                # [C,N], strictly negative
        d_a = (delta.reshape(b, l, c, 1) * a.reshape(1, 1, c, n)).exp()
        d_bu = (delta * x).reshape(b, l, c, 1) * bm.reshape(b, l, 1, n)
        record_macs(3 * b * l * c * n)

        h = Tensor(np.zeros((b, c, n), dtype=x.dtype))
        ys = []
        for t in range(l):
            h = d_a[:, t] * h + d_bu[:, t]
            ys.append((h * cm[:, t].reshape(b, 1, n)).sum(axis=2))
        y = stack(ys, axis=1)                                # [B,L,C]
        return y + self.d_skip.reshape(1, 1, c) * x
