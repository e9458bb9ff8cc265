"""Parameter registry and the small layer set the models are built from."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core as T
from .core import Tensor


@dataclass
class ParamEntry:
    tensor: Tensor
    group: str
    init: str


@dataclass
class ParameterRegistry:
    """Named trainable tensors, non-trainable buffers, and optimizer moments.

    ``group`` tags let training stages freeze whole parameter groups at once.
    """

    params: dict[str, ParamEntry] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    state: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    step_count: int = 0

    def add(self, name: str, shape: tuple, init: str, group: str, rng: np.random.Generator,
            fan_in: int | None = None) -> Tensor:
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate parameter name {name!r}")
        shape = tuple(shape)
        if init == "fan_in_uniform":
            fan = fan_in if fan_in is not None else shape[0]
            bound = np.sqrt(3.0 / fan)
            data = rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "normal":
            data = rng.normal(0.0, 0.02, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = ParamEntry(t, group, init)
        return t

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate buffer name {name!r}")
        self.buffers[name] = np.array(value, dtype=np.float64)
        return self.buffers[name]

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name].tensor

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def groups(self) -> set[str]:
        return {e.group for e in self.params.values()}

    def in_group(self, group: str) -> list[str]:
        return [n for n, e in self.params.items() if e.group == group]

    def set_trainable(self, groups) -> None:
        """Make exactly the parameters of ``groups`` trainable."""
        groups = set(groups)
        unknown = groups - self.groups()
        if unknown:
            raise KeyError(f"unknown parameter groups {sorted(unknown)}")
        for e in self.params.values():
            e.tensor.requires_grad = e.group in groups

    def trainable(self) -> list[str]:
        return [n for n, e in self.params.items() if e.tensor.requires_grad]

    def zero_grad(self) -> None:
        for e in self.params.values():
            e.tensor.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        out = {n: e.tensor.data.copy() for n, e in self.params.items()}
        out.update({n: b.copy() for n, b in self.buffers.items()})
        return out

    def load(self, values: dict[str, np.ndarray]) -> None:
        expected = set(self.params) | set(self.buffers)
        missing = expected - set(values)
        extra = set(values) - expected
        if missing or extra:
            raise KeyError(f"checkpoint mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for n, e in self.params.items():
            v = np.asarray(values[n], dtype=np.float64)
            if v.shape != e.tensor.shape:
                raise ValueError(f"{n}: checkpoint shape {v.shape} != {e.tensor.shape}")
            e.tensor.data = v.copy()
        for n, b in self.buffers.items():
            b[...] = values[n]


class Linear:
    def __init__(self, reg: ParameterRegistry, name: str, n_in: int, n_out: int, group: str,
                 rng: np.random.Generator):
        self.w = reg.add(f"{name}.w", (n_in, n_out), "fan_in_uniform", group, rng)
        self.b = reg.add(f"{name}.b", (n_out,), "zeros", group, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b


class MLP:
    """Linear layers with relu between them (none after the last)."""

    def __init__(self, reg, name, widths, group, rng):
        self.layers = [Linear(reg, f"{name}.{i}", a, b, group, rng)
                       for i, (a, b) in enumerate(zip(widths[:-1], widths[1:]))]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x


class Conv2d:
    def __init__(self, reg, name, c_in, c_out, k, group, rng, bias=True):
        self.w = reg.add(f"{name}.w", (c_out, c_in, k, k), "fan_in_uniform", group, rng, fan_in=c_in * k * k)
        self.b = reg.add(f"{name}.b", (c_out,), "zeros", group, rng) if bias else None

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b)


class BatchNorm:
    # batch statistics below this batch size are too noisy; fall back to running stats
    MIN_BATCH = 8

    def __init__(self, reg, name, channels, group, rng, momentum=0.9):
        self.gain = reg.add(f"{name}.gain", (channels,), "ones", group, rng)
        self.bias = reg.add(f"{name}.bias", (channels,), "zeros", group, rng)
        self.rmean = reg.add_buffer(f"{name}.running_mean", np.zeros(channels))
        self.rvar = reg.add_buffer(f"{name}.running_var", np.ones(channels))
        self.momentum = momentum
        self.training = False

    def __call__(self, x):
        batch = self.training and x.shape[0] >= self.MIN_BATCH
        return T.batch_norm(x, self.gain, self.bias, self.rmean, self.rvar, batch, self.momentum)


class LayerNorm:
    def __init__(self, reg, name, width, group, rng):
        self.gain = reg.add(f"{name}.gain", (width,), "ones", group, rng)
        self.bias = reg.add(f"{name}.bias", (width,), "zeros", group, rng)

    def __call__(self, x):
        return T.layer_norm(x, self.gain, self.bias)


class EncoderLayer:
    """Post-norm transformer encoder layer: attention, add & norm, MLP, add & norm."""

    def __init__(self, reg, name, width, heads, group, rng, hidden=None):
        hidden = hidden or 2 * width
        self.heads = heads
        self.q = Linear(reg, f"{name}.q", width, width, group, rng)
        self.k = Linear(reg, f"{name}.k", width, width, group, rng)
        self.v = Linear(reg, f"{name}.v", width, width, group, rng)
        self.o = Linear(reg, f"{name}.o", width, width, group, rng)
        self.norm1 = LayerNorm(reg, f"{name}.norm1", width, group, rng)
        self.mlp = MLP(reg, f"{name}.mlp", (width, hidden, width), group, rng)
        self.norm2 = LayerNorm(reg, f"{name}.norm2", width, group, rng)

    def __call__(self, x):
        a = T.multi_head_attention(x, self.q.w, self.q.b, self.k.w, self.k.b, self.v.w, self.v.b,
                                   self.o.w, self.o.b, self.heads)
        x = self.norm1(x + a)
        return self.norm2(x + self.mlp(x))
