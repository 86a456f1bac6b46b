"""Exporter producing canonical graph files from citation datasets (or a
synthetic SBM) plus reference GAT/APPNP weights trained with torch.

The package never imports the attack toolkit; it only emits the two JSON
file formats the toolkit defines.
"""

from .datasets import BridgeError, DatasetUnavailable, load_dataset
from .formats import save_graph_json, save_weights_json
from .train import train_model

__all__ = [
    "BridgeError",
    "DatasetUnavailable",
    "load_dataset",
    "save_graph_json",
    "save_weights_json",
    "train_model",
]
