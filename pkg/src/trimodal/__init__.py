"""Modal- and view-invariant 3D feature learning across meshes, point clouds and rendered images."""

__version__ = "0.1.0"
