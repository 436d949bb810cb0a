"""stegbench: desk-scale steganalysis workbench.

A from-first-principles convolutional detector (forward, exact
backpropagation, SGD training) together with embedding simulators
(LSB matching, variance-adaptive, block-DCT) and corpus tooling, small
enough that the central detection claims can be checked on a laptop.

Note: all "convolutions" are cross-correlations (no kernel flip); see
``stegbench.tensor_core``.
"""

from .tensor_core import (
    Activation,
    ConvGeometry,
    Kernel,
    NO_POOL,
    PoolSpec,
    RELU,
    TANH,
    activate,
    conv2d,
    conv_layer_forward,
    gaussian,
    pool,
)
from .network import (
    ConvLayerSpec,
    NetworkSpec,
    ParameterStore,
    backward,
    build_network,
    desk_network_spec,
    dimension_chain,
    feature_count,
    forward,
    forward_batch,
    layer_parameter_counts,
    load_checkpoint,
    loss,
    paper_network_spec,
    parameter_count,
    save_checkpoint,
)
from .stego import EmbedResult, StegoConfig, count_modified, embed
from .dataset import Corpus, assemble, load_pgm, normalize, save_pgm, synth_covers
from .trainer import DetectionReport, TrainConfig, TrainHistory, evaluate, sgd_step, train

__all__ = [name for name in dir() if not name.startswith("_")]
