"""ResNet-18 topology image backbone with scalable width."""
import torch
from torch import nn

from .config import EncoderConfig


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, stride):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.relu = nn.ReLU(inplace=True)
        self.shortcut = None
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False), nn.BatchNorm2d(cout))

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        identity = x if self.shortcut is None else self.shortcut(x)
        return self.relu(out + identity)


class ImageEncoder(nn.Module):
    """Stem (7x7 conv, BN, ReLU, max-pool), four stages of two basic blocks, global average pool."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        chans = [cfg.c(n) for n in cfg.image_stages]
        self.stem = nn.Sequential(
            nn.Conv2d(3, chans[0], 7, 2, 3, bias=False),
            nn.BatchNorm2d(chans[0]),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        stages, cin = [], chans[0]
        for i, cout in enumerate(chans):
            stride = 1 if i == 0 else 2
            stages.append(nn.Sequential(BasicBlock(cin, cout, stride), BasicBlock(cout, cout, 1)))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.out_dim = chans[-1]

    def forward(self, images):
        """``images``: (B, H, W, 3) in [0, 1] -> (B, out_dim)."""
        if images.dim() != 4 or images.shape[-1] != 3:
            raise ValueError(f"expected (B, H, W, 3) images, got {tuple(images.shape)}")
        x = images.permute(0, 3, 1, 2) - 0.5
        x = self.stages(self.stem(x))
        return x.mean(dim=(2, 3))
