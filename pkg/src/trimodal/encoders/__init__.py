"""Mesh, point-cloud and image backbones with projection heads."""
from .config import EncoderConfig
from .image import ImageEncoder
from .mesh import FaceKernelCorrelation, FaceRotateConv, MeshConv, MeshEncoder
from .model import (
    MODALITIES,
    ProjectionHead,
    TriModalNet,
    build_model,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from .point import EdgeConv, PointEncoder, edge_conv, knn_indices

__all__ = [
    "EncoderConfig", "ImageEncoder", "FaceKernelCorrelation", "FaceRotateConv", "MeshConv",
    "MeshEncoder", "MODALITIES", "ProjectionHead", "TriModalNet", "build_model", "load_checkpoint",
    "read_checkpoint", "save_checkpoint", "EdgeConv", "PointEncoder", "edge_conv", "knn_indices",
]
