"""Meshes -> point clouds, rendered views and face descriptors."""
from .augment import AugmentConfig, augment, augment_image, augment_mesh, augment_points, rotation_about_up
from .dataset import DatasetArchive, PrepConfig, build_dataset, prepare_object
from .faces import FaceFeatureSet, extract_face_features, face_adjacency
from .mesh import MeshError, MeshObject, OFFParseError, load_mesh, parse_off, to_off, write_off
from .render import ImageView, RenderConfig, render_views
from .sampling import farthest_point_sample, normalize_unit_sphere, sample_point_cloud, sample_surface

__all__ = [
    "AugmentConfig", "DatasetArchive", "FaceFeatureSet", "ImageView", "MeshError", "MeshObject",
    "OFFParseError", "PrepConfig", "RenderConfig", "augment", "augment_image", "augment_mesh",
    "augment_points", "build_dataset", "extract_face_features", "face_adjacency",
    "farthest_point_sample", "load_mesh", "normalize_unit_sphere", "parse_off", "prepare_object",
    "render_views", "rotation_about_up", "sample_point_cloud", "sample_surface", "to_off", "write_off",
]
