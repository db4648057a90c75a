"""Node classification with IGR-selected, duplicated structural inputs (MSI-GNN)."""

from .graph import DatasetError, Graph, SplitMasks, from_edges, load_graph, make_splits, save_graph
from .harness import (ExperimentResult, SearchSpace, TrainConfig, evaluate, grid_search,
                      train_once)
from .models import Model, ModelConfig
from .structure import (HopAdjacency, MsiConfig, SelectedStructure, build_msi_layer,
                        compute_hop_adjacency, entropy, igr_score, select_columns)

__version__ = "0.1.0"
