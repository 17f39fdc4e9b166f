"""Graph-embedded multi-layer kernel ridge regression for one-class classification."""

from .classifiers import CLASSIFIERS, GridSpec, classifier, config_grid, make_config
from .data_io import FoldSplit, LabeledDataset, MinMaxScaler, OneClassTask, kfold_split, load_csv, make_oneclass_tasks
from .evaluation import ConfusionCounts, ResultTable, evaluate_fold, gmean, grid_search, stats_report
from .exceptions import GemkocError
from .graphs import GraphSpec, Recipe
from .kernels import KernelMatrix, mean_distance_sigma, pairwise_sq_dist, rbf_kernel
from .layers import LayerHyperparams, TrainedLayer
from .model import Label, MkocConfig, MkocModel, ThresholdKind, Verdict, fit, predict, score_samples
from .persistence import load_model, save_model

__version__ = "0.1.0"
