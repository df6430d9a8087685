"""Hawkes-decayed, community-initialised temporal knowledge graph reasoning."""
from .community import (CommunityAssignment, LayeredGraph, build_layered_graph, community_indicator,
                        delta_modularity, detect_communities, modularity)
from .config import ABLATIONS, RunConfig, TrainConfig
from .evaluation import MetricsReport, evaluate, rank_query
from .graph import (DatasetBundle, HistoryGraph, Quadruple, TemporalGraph, add_inverse_quadruples,
                    history_graph, load_dataset, snapshot)
from .model import HERLN
from .params import ParameterStore, adam_step, load_checkpoint, save_checkpoint
from .training import train

__version__ = "0.1.0"
