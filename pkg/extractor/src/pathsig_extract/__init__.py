"""Dump pretrained-model layers into the pathsig analysis wire format."""

from .extract import ExtractionJob, extract, resolve_model, select_linear
from .mapping import (
    MappedLabels,
    bundled_class_list_path,
    bundled_mapping_path,
    class_subset,
    load_class_list,
    load_mapping,
    map_labels,
)

__version__ = "0.1.0"

__all__ = [
    "ExtractionJob",
    "MappedLabels",
    "bundled_class_list_path",
    "bundled_mapping_path",
    "class_subset",
    "extract",
    "load_class_list",
    "load_mapping",
    "map_labels",
    "resolve_model",
    "select_linear",
]
