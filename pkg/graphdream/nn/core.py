"""
NN Core - Parameter store, dense and LSTM layers, temperature softmax, Adam, LR schedule
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch

from graphdream.exceptions import ShapeMismatch

DTYPE = torch.float64


class ParamStore:
    """
    Named float64 leaf tensors plus the Adam optimizer that owns their moment buffers.

    Gradients live in each tensor's `.grad`; parameters are added once at build time.
    """

    def __init__(self, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self._params: Dict[str, torch.Tensor] = {}
        self._betas = betas
        self._eps = eps
        self._optimizer: Optional[torch.optim.Adam] = None

    def add(self, name: str, shape: Sequence[int], fan_in: int,
            generator: Optional[torch.Generator] = None) -> torch.Tensor:
        """Register a parameter initialized uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]"""
        if name in self._params:
            raise KeyError(f"parameter {name} already exists")
        if self._optimizer is not None:
            raise RuntimeError("cannot add parameters after the optimizer was created")
        bound = 1.0 / math.sqrt(max(fan_in, 1))
        value = (torch.rand(tuple(shape), generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound
        tensor = value.requires_grad_(True)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> torch.Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def parameters(self) -> List[torch.Tensor]:
        return list(self._params.values())

    def count(self) -> int:
        return sum(p.numel() for p in self._params.values())

    @property
    def optimizer(self) -> torch.optim.Adam:
        if self._optimizer is None:
            self._optimizer = torch.optim.Adam(self.parameters(), lr=1e-3, betas=self._betas, eps=self._eps)
        return self._optimizer

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def grad_norm(self) -> float:
        total = 0.0
        for p in self._params.values():
            if p.grad is not None:
                total += float((p.grad ** 2).sum())
        return math.sqrt(total)

    def clip_grad_norm(self, max_norm: float) -> float:
        return float(torch.nn.utils.clip_grad_norm_(self.parameters(), max_norm))

    def zero_(self):
        """Set every parameter to zero (used by tests of degenerate cases)"""
        with torch.no_grad():
            for p in self._params.values():
                p.zero_()

    def state_dict(self) -> Dict[str, torch.Tensor]:
        return {name: p.detach().clone() for name, p in self._params.items()}

    def load_state_dict(self, state: Dict[str, torch.Tensor]):
        missing = set(self._params) - set(state)
        if missing:
            raise KeyError(f"missing parameters {sorted(missing)}")
        with torch.no_grad():
            for name, p in self._params.items():
                value = torch.as_tensor(state[name], dtype=DTYPE)
                if value.shape != p.shape:
                    raise ShapeMismatch(f"parameter {name}: {tuple(value.shape)} vs {tuple(p.shape)}")
                p.copy_(value)


@dataclass
class LstmState:
    """Hidden and cell vectors, shape (H,) or (B, H)"""
    h: torch.Tensor
    c: torch.Tensor

    @classmethod
    def zeros(cls, hidden: int, batch: Optional[int] = None) -> "LstmState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(torch.zeros(shape, dtype=DTYPE), torch.zeros(shape, dtype=DTYPE))

    def detach(self) -> "LstmState":
        return LstmState(self.h.detach(), self.c.detach())


def add_dense(store: ParamStore, prefix: str, n_in: int, n_out: int,
              generator: Optional[torch.Generator] = None):
    store.add(f"{prefix}.W", (n_out, n_in), n_in, generator)
    store.add(f"{prefix}.b", (n_out,), n_in, generator)


def dense(x: torch.Tensor, store: ParamStore, prefix: str) -> torch.Tensor:
    """y = W x + b over the last axis"""
    W, b = store[f"{prefix}.W"], store[f"{prefix}.b"]
    if x.shape[-1] != W.shape[1]:
        raise ShapeMismatch(f"dense {prefix}: input width {x.shape[-1]}, expected {W.shape[1]}")
    return x @ W.T + b


def add_lstm(store: ParamStore, prefix: str, n_in: int, hidden: int,
             generator: Optional[torch.Generator] = None):
    store.add(f"{prefix}.Wx", (4 * hidden, n_in), hidden, generator)
    store.add(f"{prefix}.Wh", (4 * hidden, hidden), hidden, generator)
    store.add(f"{prefix}.b", (4 * hidden,), hidden, generator)


def lstm_step(x: torch.Tensor, state: LstmState, store: ParamStore, prefix: str) -> LstmState:
    """One LSTM step; gate order input, forget, candidate, output"""
    Wx, Wh, b = store[f"{prefix}.Wx"], store[f"{prefix}.Wh"], store[f"{prefix}.b"]
    if x.shape[-1] != Wx.shape[1]:
        raise ShapeMismatch(f"lstm {prefix}: input width {x.shape[-1]}, expected {Wx.shape[1]}")
    if state.h.shape[-1] != Wh.shape[1]:
        raise ShapeMismatch(f"lstm {prefix}: hidden width {state.h.shape[-1]}, expected {Wh.shape[1]}")
    gates = x @ Wx.T + state.h @ Wh.T + b
    i, f, g, o = gates.chunk(4, dim=-1)
    c = torch.sigmoid(f) * state.c + torch.sigmoid(i) * torch.tanh(g)
    h = torch.sigmoid(o) * torch.tanh(c)
    return LstmState(h, c)


def softmax_t(logits: torch.Tensor, tau: float = 1.0) -> torch.Tensor:
    """softmax(x / tau) over the last axis; torch subtracts the max internally"""
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    return torch.softmax(logits / tau, dim=-1)


def softmax_t_np(logits: np.ndarray, tau: float = 1.0) -> np.ndarray:
    return softmax_t(torch.as_tensor(np.asarray(logits, dtype=np.float64)), tau).numpy()


def entropy(probs: torch.Tensor) -> torch.Tensor:
    """Shannon entropy over the last axis, treating 0·log 0 as 0"""
    logs = torch.where(probs > 0, torch.log(probs.clamp_min(1e-300)), torch.zeros_like(probs))
    return -(probs * logs).sum(dim=-1)


def adam_update(store: ParamStore, lr: float):
    """One Adam step over every parameter with a populated gradient"""
    optimizer = store.optimizer
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()


def poly_decay_lr(step: int, total: int, lr0: float, lr_end: float, power: float = 2.0) -> float:
    """lr_end + (lr0 - lr_end) * (1 - step/total)^power"""
    if total <= 0 or not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    return lr_end + (lr0 - lr_end) * (1.0 - step / total) ** power


def check_gradients(fn: Callable[..., torch.Tensor], inputs: Sequence[torch.Tensor],
                    eps: float = 1e-6, rtol: float = 1e-4, atol: float = 1e-7) -> bool:
    """
    Central finite-difference check of autograd gradients for a float64 function.
    """
    inputs = tuple(t.detach().clone().requires_grad_(True) for t in inputs)
    return torch.autograd.gradcheck(fn, inputs, eps=eps, atol=atol, rtol=rtol, raise_exception=False)
