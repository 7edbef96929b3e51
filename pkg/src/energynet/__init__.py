"""Discrete potential theory on weighted networks: energy space, kernels,
Krein and Friedrichs comparisons, Green operator and defect vectors."""

from energynet.errors import DomainError, EnergyNetError, NetworkError, NumericalError, ParseError
from energynet.functions import VertexFunction
from energynet.graph_core import (
    Mode,
    Network,
    Truncation,
    degree,
    load_network,
    make_geometric_integers,
    make_geometric_tree,
    make_path,
    make_random_network,
    save_network,
    truncate,
    validate,
    whole,
)

__version__ = "0.1.0"
