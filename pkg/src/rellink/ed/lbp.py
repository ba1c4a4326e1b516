"""Max-product loopy belief propagation over a fully connected mention graph.

Everything runs in the log domain. Messages start at zero; the first round
takes the computed messages as-is (there is nothing to damp towards), later
rounds blend ``damping * old + (1 - damping) * new``. Each message is shifted
so its maximum over the receiver's real candidates is 0.
"""

from typing import Callable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import torch

from ..errors import NonFiniteScores
from .scoring import NEG


def _normalize(msg: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    # msg[i, j, b]: receiver j's candidate b
    recv = mask[None, :, :]
    top = msg.masked_fill(~recv, NEG).amax(dim=2, keepdim=True)
    return torch.where(recv, msg - top, torch.zeros_like(msg))


def max_product_lbp(psi: torch.Tensor, pair: torch.Tensor, mask: torch.Tensor,
                    iters: int, damping: float) -> torch.Tensor:
    """Max-marginals (n, C) for local scores ``psi`` and symmetric tables ``pair``.

    ``pair[i, j, a, b]`` scores mention i taking candidate a jointly with j
    taking b and must equal ``pair[j, i, b, a]``. Padded slots of the result are 0.
    """
    n, C = psi.shape
    real_psi = psi[mask]
    if not torch.isfinite(real_psi).all():
        raise NonFiniteScores("local scores contain NaN or infinity")
    if n < 2:
        return torch.where(mask, psi, torch.zeros_like(psi))
    pair_mask = mask[:, None, :, None] & mask[None, :, None, :]
    off_diag = ~torch.eye(n, dtype=torch.bool)[:, :, None, None]
    if not torch.isfinite(pair[pair_mask & off_diag]).all():
        raise NonFiniteScores("pairwise scores contain NaN or infinity")

    psi = psi.masked_fill(~mask, NEG)
    no_self = (~torch.eye(n, dtype=torch.bool))[:, :, None]
    msgs = psi.new_zeros(n, n, C)
    for t in range(iters):
        belief = psi + msgs.sum(dim=0)                    # (i, a)
        outgoing = belief[:, None, :] - msgs.transpose(0, 1)  # (i, j, a): drop j's message to i
        new = (outgoing[:, :, :, None] + pair).amax(dim=2)   # max over a -> (i, j, b)
        new = _normalize(new, mask)
        new = torch.where(no_self, new, torch.zeros_like(new))
        if t > 0:
            new = _normalize(damping * msgs + (1.0 - damping) * new, mask)
            new = torch.where(no_self, new, torch.zeros_like(new))
        msgs = new
    marginal = psi + msgs.sum(dim=0)
    return torch.where(mask, marginal, torch.zeros_like(marginal))


def lbp_infer(psi: Sequence[Sequence[float]],
              pairwise: Union[Mapping[Tuple[int, int], np.ndarray], Callable[[int, int], np.ndarray]],
              iters: int = 10, damping: float = 0.5) -> List[np.ndarray]:
    """Convenience wrapper over ragged inputs.

    ``psi[i]`` holds mention i's local scores; ``pairwise[(i, j)]`` (for i < j,
    or a callable) is the joint table of shape (len(psi[i]), len(psi[j])).
    Returns one max-marginal array per mention.
    """
    n = len(psi)
    C = max((len(p) for p in psi), default=0)
    psi_t = torch.zeros(n, C, dtype=torch.float64)
    mask = torch.zeros(n, C, dtype=torch.bool)
    for i, p in enumerate(psi):
        psi_t[i, :len(p)] = torch.as_tensor(np.asarray(p, dtype=np.float64))
        mask[i, :len(p)] = True
    get = pairwise if callable(pairwise) else (lambda i, j: pairwise[(i, j)])
    pair = torch.zeros(n, n, C, C, dtype=torch.float64)
    for i in range(n):
        for j in range(i + 1, n):
            table = torch.as_tensor(np.asarray(get(i, j), dtype=np.float64))
            pair[i, j, :table.shape[0], :table.shape[1]] = table
            pair[j, i, :table.shape[1], :table.shape[0]] = table.T
    out = max_product_lbp(psi_t, pair, mask, iters, damping)
    return [out[i, :len(p)].numpy() for i, p in enumerate(psi)]
