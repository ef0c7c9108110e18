"""MeshNet-style mesh backbone over fixed-size face descriptor sets."""
import math

import torch
from torch import nn

from .config import EncoderConfig


def mlp(channels, final_act=True):
    """Per-element FC stack with BN + ReLU, applied to (..., C) tensors."""
    layers = []
    for i, (a, b) in enumerate(zip(channels[:-1], channels[1:])):
        layers.append(nn.Linear(a, b, bias=False))
        layers.append(nn.BatchNorm1d(b))
        if final_act or i < len(channels) - 2:
            layers.append(nn.ReLU())
    return _PerElement(nn.Sequential(*layers))


class _PerElement(nn.Module):
    def __init__(self, net):
        super().__init__()
        self.net = net

    def forward(self, x):
        shape = x.shape
        return self.net(x.reshape(-1, shape[-1])).reshape(*shape[:-1], -1)


def gather_faces(x, neighbors):
    """(B, F, C) features, (B, F, 3) indices -> (B, F, 3, C)."""
    B, F, C = x.shape
    flat = neighbors.reshape(B, -1, 1).expand(-1, -1, C)
    return torch.gather(x, 1, flat).reshape(B, F, 3, C)


class FaceRotateConv(nn.Module):
    """Shared FC over each cyclic pair of corner vectors, averaged, then fused."""

    def __init__(self, rotate, fuse):
        super().__init__()
        self.rotate = mlp((6,) + tuple(rotate))
        self.fuse = mlp((rotate[-1],) + tuple(fuse))
        self.out_dim = fuse[-1]

    def forward(self, corners):
        c1, c2, c3 = corners.unbind(dim=2)
        pairs = torch.stack([torch.cat([c1, c2], -1), torch.cat([c2, c3], -1), torch.cat([c3, c1], -1)], dim=2)
        return self.fuse(self.rotate(pairs).mean(dim=2))


class FaceKernelCorrelation(nn.Module):
    """Mean Gaussian similarity between a face's normal set (self + 3 neighbours) and learnable unit-vector kernels."""

    def __init__(self, num_kernels, kernel_size=4, sigma=0.2):
        super().__init__()
        g = torch.Generator().manual_seed(0)
        self.alpha = nn.Parameter(torch.rand(num_kernels, kernel_size, generator=g) * math.pi)
        self.beta = nn.Parameter(torch.rand(num_kernels, kernel_size, generator=g) * 2 * math.pi)
        self.sigma = sigma
        self.bn = nn.BatchNorm1d(num_kernels)
        self.out_dim = num_kernels

    def kernels(self):
        return torch.stack(
            [torch.sin(self.alpha) * torch.cos(self.beta), torch.sin(self.alpha) * torch.sin(self.beta), torch.cos(self.alpha)],
            dim=-1,
        )  # (K, M, 3)

    def forward(self, normals, neighbors):
        nset = torch.cat([normals.unsqueeze(2), gather_faces(normals, neighbors)], dim=2)  # (B, F, 4, 3)
        kern = self.kernels().to(normals.dtype)  # (K, M, 3)
        K, M, _ = kern.shape
        flat = kern.reshape(K * M, 3)
        sq = (nset * nset).sum(-1, keepdim=True) + (flat * flat).sum(-1) - 2 * nset @ flat.T  # (B, F, 4, K*M)
        corr = torch.exp(-sq.clamp_min(0) / (2 * self.sigma**2))
        B, F = corr.shape[:2]
        corr = corr.reshape(B, F, -1, K, M).mean(dim=(2, 4))
        return torch.relu(self.bn(corr.reshape(-1, K)).reshape(B, F, K))


class MeshConv(nn.Module):
    """Combine spatial with structural features; aggregate structural features over edge neighbours."""

    def __init__(self, spatial_in, structural_in, spatial_out, structural_out):
        super().__init__()
        self.combine = mlp((spatial_in + structural_in, spatial_out))
        self.concat = mlp((2 * structural_in, structural_in))
        self.aggregate = mlp((structural_in, structural_out))

    def forward(self, spatial, structural, neighbors):
        spatial = self.combine(torch.cat([spatial, structural], -1))
        nb = gather_faces(structural, neighbors)  # (B, F, 3, C)
        own = structural.unsqueeze(2).expand_as(nb)
        structural = self.concat(torch.cat([own, nb], -1)).max(dim=2).values
        return spatial, self.aggregate(structural)


class MeshEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        s = [cfg.c(n) for n in cfg.spatial]
        self.spatial = mlp((3,) + tuple(s))
        self.rotate = FaceRotateConv([cfg.c(n) for n in cfg.rotate], [cfg.c(n) for n in cfg.rotate_fuse])
        self.kernel_corr = FaceKernelCorrelation(cfg.c(cfg.kernels), cfg.kernel_size, cfg.kernel_sigma)
        struct_in = self.rotate.out_dim + self.kernel_corr.out_dim + 3
        self.structural = mlp((struct_in, struct_in))
        sp1, st1 = (cfg.c(n) for n in cfg.mesh_conv1)
        sp2, st2 = (cfg.c(n) for n in cfg.mesh_conv2)
        self.conv1 = MeshConv(s[-1], struct_in, sp1, st1)
        self.conv2 = MeshConv(sp1, st1, sp2, st2)
        self.fuse = mlp((sp2 + st2, cfg.c(cfg.mesh_fuse)))
        self.head = mlp((cfg.c(cfg.mesh_fuse), cfg.c(cfg.global_dim)))
        self.structural_in = struct_in
        self.out_dim = cfg.c(cfg.global_dim)

    def structural_descriptor(self, corners, normals, neighbors):
        return self.structural(
            torch.cat([self.rotate(corners), self.kernel_corr(normals, neighbors), normals], -1)
        )

    def forward(self, centers, corners, normals, neighbors):
        """(B, F, 3), (B, F, 3, 3), (B, F, 3), (B, F, 3) int -> (B, out_dim)."""
        if centers.dim() != 3 or centers.shape[-1] != 3:
            raise ValueError(f"expected (B, F, 3) centers, got {tuple(centers.shape)}")
        B, F, _ = centers.shape
        if corners.shape != (B, F, 3, 3) or normals.shape != (B, F, 3) or neighbors.shape != (B, F, 3):
            raise ValueError("face descriptor shapes disagree")
        if neighbors.numel() and (neighbors.min() < 0 or neighbors.max() >= F):
            raise IndexError("neighbor index out of range")
        neighbors = neighbors.long()
        sp = self.spatial(centers)
        st = self.structural_descriptor(corners, normals, neighbors)
        sp, st = self.conv1(sp, st, neighbors)
        sp, st = self.conv2(sp, st, neighbors)
        fused = self.fuse(torch.cat([sp, st], -1)).max(dim=1).values
        return self.head(fused)
