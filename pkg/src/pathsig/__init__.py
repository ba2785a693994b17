"""Class-separation and robustness diagnostics from weight-activation paths.

The pipeline: a dense layer's weight matrix and per-sample input activations
become per-sample interaction matrices, thresholded into binary significance
masks, accumulated into per-class Bernoulli models, and compared with KL
divergence, entropy and sparsity statistics.
"""

from .ablations import (
    ClassPointCloud,
    energy_distances,
    prototype_interaction_kl,
    softmax_output_kl,
)
from .class_stats import BernoulliClassModel, class_entropy, fit_class_models
from .divergences import (
    DivergenceMatrix,
    bernoulli_kl,
    id_ood_distance,
    mean_class_entropy,
    mean_inter_class,
    pairwise_matrix,
)
from .estimator import ClassPathAnalyzer, DenseClassifier
from .interactions import interaction_matrix, sample_masks, significance_mask
from .mlp import (
    LabeledDataset,
    LayerSpec,
    TrainConfig,
    forward,
    gen_blobs,
    init_network,
    shuffle_labels,
    train_sgd,
)
from .sparsity import Histogram, build_histogram, path_frequencies, tail_mass
from .tensorio import ActivationDump, DumpError, load_dump, read_array, write_array, write_dump

__version__ = "0.1.0"

__all__ = [
    "ActivationDump",
    "BernoulliClassModel",
    "ClassPathAnalyzer",
    "ClassPointCloud",
    "DenseClassifier",
    "DivergenceMatrix",
    "DumpError",
    "Histogram",
    "LabeledDataset",
    "LayerSpec",
    "TrainConfig",
    "bernoulli_kl",
    "build_histogram",
    "class_entropy",
    "energy_distances",
    "fit_class_models",
    "forward",
    "gen_blobs",
    "id_ood_distance",
    "init_network",
    "interaction_matrix",
    "load_dump",
    "mean_class_entropy",
    "mean_inter_class",
    "pairwise_matrix",
    "path_frequencies",
    "prototype_interaction_kl",
    "read_array",
    "sample_masks",
    "shuffle_labels",
    "significance_mask",
    "softmax_output_kl",
    "tail_mass",
    "train_sgd",
    "write_array",
    "write_dump",
]
