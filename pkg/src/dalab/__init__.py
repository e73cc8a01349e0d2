"""Domain adaptation laboratory: aligned networks, generalization bounds, concentration checks."""

from .bounds import BoundInputs, BoundReport
from .data import DomainDataset, gen_shifted_domains
from .kernels import KernelSpec, mmd2_layer, mmd2_total
from .nn import NetworkParams, NetworkSpec, backward, clip_params, forward, init_params
from .trainers import AdversarialModel, MmdModel, TrainConfig, train

__version__ = "0.1.0"
