"""ED hyperparameters, learnable tensors and the binary model file.

Model file (little-endian)::

    magic "RELMODEL", version u32, K u32, d u32, T u32, R u32, H u32,
    margin f64, damping f64
    then every tensor of EDParams in declaration order as float32
"""

import math
import os
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from ..errors import StoreFormatError

MAGIC = b"RELMODEL"
VERSION = 1
HEADER = struct.Struct("<8sIIIIIIdd")


@dataclass(frozen=True)
class EDHyperParams:
    K: int = 3
    d: int = 300
    margin: float = 0.9
    lbp_iters: int = 10
    lbp_damping: float = 0.5
    attention_keep: int = 25
    scorer_hidden: int = 100

    def __post_init__(self):
        if self.K < 1 or self.d < 1 or self.lbp_iters < 1:
            raise ValueError("K, d and lbp_iters must be >= 1")
        if not 0.0 <= self.lbp_damping < 1.0:
            raise ValueError("lbp_damping must lie in [0, 1)")
        if self.attention_keep < 1 or self.scorer_hidden < 1:
            raise ValueError("attention_keep and scorer_hidden must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class EDParams(nn.Module):
    """All learned tensors. Diagonal matrices are stored as vectors.

    ``calib_a``/``calib_b`` are buffers: they are fit after training by
    logistic regression and never see the ranking-loss gradient.
    """

    TENSORS = ("A_diag", "B_diag", "R_diag", "D_diag", "f_W", "f_b",
               "W1", "b1", "W2", "b2", "calib_a", "calib_b")

    def __init__(self, hyper: EDHyperParams, seed: int = 0, dtype=torch.float64):
        super().__init__()
        self.hyper = hyper
        d, K, H = hyper.d, hyper.K, hyper.scorer_hidden
        gen = torch.Generator().manual_seed(seed)

        def uniform(shape, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return (torch.rand(shape, generator=gen, dtype=dtype) * 2 - 1) * bound

        self.A_diag = nn.Parameter(torch.ones(d, dtype=dtype))
        self.B_diag = nn.Parameter(torch.ones(d, dtype=dtype))
        self.R_diag = nn.Parameter(torch.ones(K, d, dtype=dtype))
        self.D_diag = nn.Parameter(torch.zeros(K, d, dtype=dtype))
        self.f_W = nn.Parameter(uniform((2 * d, d), 2 * d))
        self.f_b = nn.Parameter(uniform((d,), 2 * d))
        self.W1 = nn.Parameter(uniform((H, 2), 2))
        self.b1 = nn.Parameter(uniform((H,), 2))
        self.W2 = nn.Parameter(uniform((H,), H))
        self.b2 = nn.Parameter(uniform((1,), H))
        self.register_buffer("calib_a", torch.ones((), dtype=dtype))
        self.register_buffer("calib_b", torch.zeros((), dtype=dtype))

    def shapes(self):
        return {name: tuple(getattr(self, name).shape) for name in self.TENSORS}

    def tensors(self):
        return [(name, getattr(self, name)) for name in self.TENSORS]

    def save(self, path) -> None:
        h = self.hyper
        header = HEADER.pack(MAGIC, VERSION, h.K, h.d, h.lbp_iters, h.attention_keep,
                             h.scorer_hidden, h.margin, h.lbp_damping)
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as f:
            f.write(header)
            for _, t in self.tensors():
                f.write(t.detach().cpu().numpy().astype("<f4").tobytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, dtype=torch.float64) -> "EDParams":
        with open(path, "rb") as f:
            raw = f.read()
        if len(raw) < HEADER.size:
            raise StoreFormatError(f"{path}: truncated model header")
        magic, version, K, d, T, R, H, margin, damping = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise StoreFormatError(f"{path}: not a model file (bad magic)")
        if version != VERSION:
            raise StoreFormatError(f"{path}: unsupported model version {version}")
        try:
            hyper = EDHyperParams(K=K, d=d, margin=margin, lbp_iters=T, lbp_damping=damping,
                                  attention_keep=R, scorer_hidden=H)
        except ValueError as exc:
            raise StoreFormatError(f"{path}: invalid hyperparameters ({exc})") from None
        params = cls(hyper, dtype=dtype)
        pos = HEADER.size
        with torch.no_grad():
            for _, t in params.tensors():
                n = t.numel()
                if pos + 4 * n > len(raw):
                    raise StoreFormatError(f"{path}: truncated tensor data")
                arr = np.frombuffer(raw, "<f4", n, pos).astype(np.float64)
                t.copy_(torch.from_numpy(arr).reshape(t.shape))
                pos += 4 * n
        if pos != len(raw):
            raise StoreFormatError(f"{path}: trailing bytes after tensors")
        if not all(torch.isfinite(t).all() for _, t in params.tensors()):
            raise StoreFormatError(f"{path}: non-finite parameter values")
        return params
