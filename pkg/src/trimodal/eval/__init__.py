"""Downstream evaluation of pretrained encoders."""
from .features import FeatureTable, backbone_features, extract_feature_table, pick_views, universal_features
from .probe import few_shot_probe, fit_svm, linear_probe, permutation_chance
from .segmentation import (
    PartSegmenter,
    SegmentationHead,
    SegmentationRecord,
    category_parts,
    make_part_dataset,
    part_segmentation,
    segmentation_metrics,
    select_fraction,
)

__all__ = [
    "FeatureTable", "backbone_features", "extract_feature_table", "pick_views", "universal_features",
    "few_shot_probe", "fit_svm", "linear_probe", "permutation_chance", "PartSegmenter",
    "SegmentationHead", "SegmentationRecord", "category_parts", "make_part_dataset",
    "part_segmentation", "segmentation_metrics", "select_fraction",
]
