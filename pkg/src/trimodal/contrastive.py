"""Temperature-scaled cosine contrastive losses over in-batch negatives.

For anchors A and positives P (k rows each) the one-directional loss is

    -(1/k) sum_i log( exp(s(A_i, P_i)) /
                      (sum_{j != i} exp(s(A_i, A_j)) + sum_j exp(s(A_i, P_j))) )

with s(a, p) = a.p / (tau |a| |p|). The symmetric pair loss adds the
P -> A direction; the joint objective sums the mesh-point, mesh-image,
point-image and image-image pair losses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

DEFAULT_TAU = 0.1


@dataclass
class LossBreakdown:
    L_MP: torch.Tensor
    L_MI: torch.Tensor
    L_PI: torch.Tensor
    L_II: torch.Tensor
    total: torch.Tensor

    FIELDS = ("L_MP", "L_MI", "L_PI", "L_II", "total")

    def as_floats(self) -> dict:
        return {f: float(getattr(self, f).detach()) for f in self.FIELDS}


def _tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def _unit_rows(x: torch.Tensor) -> torch.Tensor:
    norms = x.norm(dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise ValueError("zero-norm feature vector")
    return x / norms


def similarity(a, p, tau: float = DEFAULT_TAU):
    """Cosine similarity divided by ``tau``; works on single vectors or row-aligned batches."""
    _check_tau(tau)
    a, p = _tensor(a), _tensor(p)
    return (_unit_rows(a) * _unit_rows(p)).sum(-1) / tau


def similarity_matrix(a, b, tau: float = DEFAULT_TAU) -> torch.Tensor:
    _check_tau(tau)
    return _unit_rows(_tensor(a)) @ _unit_rows(_tensor(b)).T / tau


def pair_loss(anchors, positives, tau: float = DEFAULT_TAU) -> torch.Tensor:
    """Anchor -> positive contrastive loss (log-sum-exp stabilised)."""
    A, P = _tensor(anchors), _tensor(positives)
    if A.dim() != 2 or A.shape != P.shape:
        raise ValueError(f"anchor/positive shapes differ: {tuple(A.shape)} vs {tuple(P.shape)}")
    k = A.shape[0]
    if k < 1:
        raise ValueError("empty batch")
    s_aa = similarity_matrix(A, A, tau)
    s_ap = similarity_matrix(A, P, tau)
    eye = torch.eye(k, dtype=torch.bool, device=A.device)
    s_aa = s_aa.masked_fill(eye, float("-inf"))
    log_denom = torch.logsumexp(torch.cat([s_aa, s_ap], dim=1), dim=1)
    return (log_denom - s_ap.diagonal()).mean()


def symmetric_pair_loss(A, P, tau: float = DEFAULT_TAU) -> torch.Tensor:
    return pair_loss(A, P, tau) + pair_loss(P, A, tau)


def total_loss(f_m, f_p, f_i1, f_i2, tau: float = DEFAULT_TAU, weights=None) -> LossBreakdown:
    """Mesh-point, mesh-image(view 1), point-image(view 2) and view-view losses.

    ``weights`` optionally scales the four terms (keys L_MP, L_MI, L_PI,
    L_II); the default is the plain sum.
    """
    feats = [_tensor(f) for f in (f_m, f_p, f_i1, f_i2)]
    if len({tuple(f.shape) for f in feats}) != 1:
        raise ValueError("all four feature batches must share (k, D)")
    f_m, f_p, f_i1, f_i2 = feats
    parts = {
        "L_MP": symmetric_pair_loss(f_m, f_p, tau),
        "L_MI": symmetric_pair_loss(f_m, f_i1, tau),
        "L_PI": symmetric_pair_loss(f_p, f_i2, tau),
        "L_II": symmetric_pair_loss(f_i1, f_i2, tau),
    }
    w = {name: 1.0 for name in parts}
    w.update(weights or {})
    total = sum(w[name] * value for name, value in parts.items())
    return LossBreakdown(total=total, **parts)


# -- scalar reference, kept deliberately naive -------------------------------

def reference_similarity(a, p, tau):
    dot = sum(x * y for x, y in zip(a, p))
    na = math.sqrt(sum(x * x for x in a))
    np_ = math.sqrt(sum(y * y for y in p))
    return dot / (tau * na * np_)


def reference_pair_loss(A, P, tau):
    A = [[float(x) for x in row] for row in A]
    P = [[float(x) for x in row] for row in P]
    k = len(A)
    acc = 0.0
    for i in range(k):
        num = math.exp(reference_similarity(A[i], P[i], tau))
        den = 0.0
        for j in range(k):
            if j != i:
                den += math.exp(reference_similarity(A[i], A[j], tau))
        for j in range(k):
            den += math.exp(reference_similarity(A[i], P[j], tau))
        acc += math.log(num / den)
    return -acc / k


def reference_total_loss(f_m, f_p, f_i1, f_i2, tau):
    def sym(a, b):
        return reference_pair_loss(a, b, tau) + reference_pair_loss(b, a, tau)

    parts = {"L_MP": sym(f_m, f_p), "L_MI": sym(f_m, f_i1), "L_PI": sym(f_p, f_i2), "L_II": sym(f_i1, f_i2)}
    parts["total"] = sum(parts.values())
    return parts
