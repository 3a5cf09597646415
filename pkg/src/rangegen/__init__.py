"""Range-constrained generative design synthesis.

A conditional GAN whose generator is steered by a frozen label estimator to
produce designs whose attributes fall inside user-specified [lower, upper]
ranges, trained on a parametric 2D silhouette domain with exactly computable
labels.
"""

from rangegen.losses import LossWeights, RangeCondition
from rangegen.models import Discriminator, Estimator, Generator
from rangegen.sampling import LabelNormalizer
from rangegen.trainer import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "Discriminator",
    "Estimator",
    "Generator",
    "LabelNormalizer",
    "LossWeights",
    "RangeCondition",
    "TrainConfig",
    "__version__",
]
