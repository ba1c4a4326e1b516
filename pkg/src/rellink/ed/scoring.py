"""Differentiable scoring components of the disambiguation model.

Batched functions work on a document padded to ``n`` mentions by ``C``
candidate slots (and ``c`` context-word slots); boolean masks mark the real
entries. Padded slots carry :data:`NEG` wherever a max or softmax could see them.
"""

import math

import torch

NEG = -1e9  # finite stand-in for -inf on padded slots


def mention_encode(mention_vecs: torch.Tensor, context_vecs: torch.Tensor, params) -> torch.Tensor:
    """f(m, c) = tanh([mean mention vec ; mean context vec] @ f_W + f_b).

    Either input may have zero rows, in which case its half of the input is zero.
    """
    d = params.f_b.shape[0]
    m = mention_vecs.mean(0) if len(mention_vecs) else params.f_b.new_zeros(d)
    c = context_vecs.mean(0) if len(context_vecs) else params.f_b.new_zeros(d)
    return encode_mentions(m[None], c[None], params)[0]


def encode_mentions(mention_avg: torch.Tensor, context_avg: torch.Tensor, params) -> torch.Tensor:
    x = torch.cat([mention_avg, context_avg], dim=-1)
    return torch.tanh(x @ params.f_W + params.f_b)


def local_psi(cand: torch.Tensor, cand_mask: torch.Tensor, ctx: torch.Tensor,
              ctx_mask: torch.Tensor, params) -> torch.Tensor:
    """Attention-weighted local compatibility, (n, C).

    Each context word w gets u(w) = max_e e.diag(A).w over the real candidates;
    the top ``attention_keep`` words are softmax-weighted into one context
    vector v, and psi(e) = e.diag(B).v.
    """
    n, C, _ = cand.shape
    if ctx.shape[1] == 0:
        return cand.new_zeros(n, C)
    u = torch.einsum("nad,d,ncd->nac", cand, params.A_diag, ctx)
    u = u.masked_fill(~cand_mask[:, :, None], NEG).amax(dim=1)
    u = u.masked_fill(~ctx_mask, NEG)
    keep = min(params.hyper.attention_keep, ctx.shape[1])
    top, idx = u.topk(keep, dim=1)
    beta = torch.softmax(top, dim=1)
    kept = torch.gather(ctx, 1, idx[:, :, None].expand(-1, -1, ctx.shape[2]))
    v = (beta[:, :, None] * kept).sum(dim=1)
    return torch.einsum("nad,d,nd->na", cand, params.B_diag, v)


def pairwise_alpha(f: torch.Tensor, D_diag: torch.Tensor) -> torch.Tensor:
    """alpha[i, j, k]: softmax over j != i of f_i.diag(D_k).f_j / sqrt(d)."""
    n, d = f.shape
    K = D_diag.shape[0]
    if n < 2:
        return f.new_zeros(n, n, K)
    logits = torch.einsum("id,kd,jd->ijk", f, D_diag, f) / math.sqrt(d)
    eye = torch.eye(n, dtype=torch.bool)[:, :, None]
    return torch.softmax(logits.masked_fill(eye, float("-inf")), dim=1)


def pairwise_phi(e_i: torch.Tensor, e_j: torch.Tensor, alpha_ij: torch.Tensor,
                 R_diag: torch.Tensor) -> torch.Tensor:
    """phi = sum_k alpha_ijk * e_i.diag(R_k).e_j."""
    return (alpha_ij * ((e_i * R_diag) @ e_j)).sum()


def pairwise_tables(cand: torch.Tensor, alpha: torch.Tensor, R_diag: torch.Tensor) -> torch.Tensor:
    """Symmetric coherence tables (n, n, C, C).

    Entry [i, j, a, b] = phi(a, b | i, j) + phi(b, a | j, i): both ordered terms
    of the pairwise sum for mentions i and j taking candidates a and b.
    """
    n, C, d = cand.shape
    K = R_diag.shape[0]
    scaled = (cand[None] * R_diag[:, None, None, :]).reshape(K * n * C, d)
    bil = (scaled @ cand.reshape(n * C, d).T).reshape(K, n, C, n, C)
    directed = torch.einsum("ijk,kiajb->ijab", alpha, bil)
    return directed + directed.permute(1, 0, 3, 2)


def final_score(max_marginal: torch.Tensor, log_prior: torch.Tensor, params) -> torch.Tensor:
    """Two-layer scorer g = W2.relu(W1.[m, log p] + b1) + b2, elementwise over candidates."""
    x = torch.stack([max_marginal, log_prior], dim=-1)
    hidden = torch.relu(x @ params.W1.T + params.b1)
    return hidden @ params.W2 + params.b2
