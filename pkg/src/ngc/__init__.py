"""Noisy graph cleaning: clean-sample selection and OOD rejection for noisily labelled embeddings."""

from .dataset import OOD, Dataset, DatasetError, SyntheticConfig, generate_synthetic, load_dataset, save_dataset
from .knn_graph import GraphParams, SparseGraph, build_knn_graph, refine_graph
from .losses import LossParams
from .metrics import accuracy, auroc, f_measure, selection_report
from .model import ToyModel
from .ood import Prototypes, classify_or_reject, compute_prototypes, ood_score
from .propagation import PropagationParams, TemporalEnsemble, propagate
from .selection import DisjointSet, SelectionState, subgraph_select
from .trainer import Hyper, TrainParams, fit

__all__ = [
    "OOD", "Dataset", "DatasetError", "SyntheticConfig", "generate_synthetic", "load_dataset", "save_dataset",
    "GraphParams", "SparseGraph", "build_knn_graph", "refine_graph",
    "LossParams",
    "accuracy", "auroc", "f_measure", "selection_report",
    "ToyModel",
    "Prototypes", "classify_or_reject", "compute_prototypes", "ood_score",
    "PropagationParams", "TemporalEnsemble", "propagate",
    "DisjointSet", "SelectionState", "subgraph_select",
    "Hyper", "TrainParams", "fit",
]
