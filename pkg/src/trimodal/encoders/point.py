"""DGCNN-style point-cloud backbone built from EdgeConv layers."""
import torch
from torch import nn

from .config import EncoderConfig


def knn_indices(x: torch.Tensor, k: int) -> torch.Tensor:
    """(B, N, C) -> (B, N, k) nearest neighbours, self excluded, ties to the lowest index.

    The order of the returned neighbours is by index, not by distance.
    """
    B, N, _ = x.shape
    if k >= N:
        raise ValueError(f"k={k} must be smaller than the number of points {N}")
    with torch.no_grad():
        sq = (x * x).sum(-1)
        d = sq[:, :, None] + sq[:, None, :] - 2.0 * x @ x.transpose(1, 2)
        d = d.clamp_min(0)
        d.diagonal(dim1=1, dim2=2).fill_(float("inf"))
        vals, ind = d.topk(k, dim=-1, largest=False)
        kth = vals[..., -1:]
        if bool(((d <= kth).sum(-1) == k).all()):  # no ties straddle the cut
            return ind.sort(dim=-1).values
        below = d < kth
        tie = d == kth
        need = k - below.sum(-1, keepdim=True)
        chosen = below | (tie & (tie.cumsum(-1) <= need))
        idx = torch.arange(N, device=x.device).expand(B, N, N)
        key = torch.where(chosen, idx, idx + N)
        return key.topk(k, dim=-1, largest=False).values.sort(dim=-1).values


class EdgeConv(nn.Module):
    """Dynamic-graph edge convolution: max_j MLP([x_i, x_j - x_i]) over the k nearest j."""

    def __init__(self, cin, cout, k):
        super().__init__()
        self.k = k
        self.mlp = nn.Sequential(nn.Linear(2 * cin, cout, bias=False), nn.BatchNorm1d(cout), nn.LeakyReLU(0.2))
        self.out_dim = cout

    def forward(self, x):
        B, N, C = x.shape
        idx = knn_indices(x, self.k)
        offset = (torch.arange(B, device=x.device) * N).view(B, 1, 1)
        nbr = x.reshape(B * N, C)[(idx + offset).reshape(-1)].reshape(B, N, self.k, C)
        xi = x.unsqueeze(2).expand(B, N, self.k, C)
        edge = torch.cat([xi, nbr - xi], dim=-1).reshape(-1, 2 * C)
        out = self.mlp(edge).reshape(B, N, self.k, -1)
        return out.max(dim=2).values


def edge_conv(features, k, out_channels, module=None):
    """Functional form; builds a fresh (eval-mode) layer unless ``module`` is given."""
    if module is None:
        module = EdgeConv(features.shape[-1], out_channels, k).to(features.dtype).eval()
    return module(features)


class PointEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        chans = [cfg.c(n) for n in cfg.edge_channels]
        layers, cin = [], 3
        for cout in chans:
            layers.append(EdgeConv(cin, cout, cfg.k))
            cin = cout
        self.convs = nn.ModuleList(layers)
        self.fc = nn.Sequential(nn.Linear(sum(chans), cfg.c(cfg.point_fc), bias=False), nn.BatchNorm1d(cfg.c(cfg.point_fc)), nn.LeakyReLU(0.2))
        self.out_dim = cfg.c(cfg.point_fc)
        self.local_dim = sum(chans)

    def forward(self, points, return_local=False):
        """``points``: (B, N, 3) -> (B, out_dim); with ``return_local`` also the concatenated EdgeConv outputs."""
        if points.dim() != 3 or points.shape[-1] != 3:
            raise ValueError(f"expected (B, N, 3) points, got {tuple(points.shape)}")
        B, N, _ = points.shape
        x, feats = points, []
        for conv in self.convs:
            x = conv(x)
            feats.append(x)
        local = torch.cat(feats, dim=-1)
        g = self.fc(local.reshape(B * N, -1)).reshape(B, N, -1).max(dim=1).values
        return (g, local) if return_local else g
