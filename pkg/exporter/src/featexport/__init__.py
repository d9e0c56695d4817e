"""Image feature export to the binary formats the training side consumes."""

from .backbones import CATALOG, Backbone, get_backbone
from .export import ExportJob, ExportResult, export, scan_classes
from .formats import write_features, write_labels

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "Backbone",
    "ExportJob",
    "ExportResult",
    "export",
    "get_backbone",
    "scan_classes",
    "write_features",
    "write_labels",
]
