"""Few-shot segmentation with feature relevance weighting and guided ensemble inference."""
from .boosting import BoostConfig, base_inference, boosted_inference, build_ensemble, fuse
from .data import Episode, FoldSplit, LabeledExample, SyntheticConfig, generate_synthetic, make_folds
from .embedding import feature_difference, masked_pool, relevance
from .errors import DataError, DegenerateMaskError, EmptyMaskError, FormatError, FsBoostError, NonFiniteError, ShapeError
from .head import HeadParams, head_forward, init_params
from .kernels import BACKEND
from .metrics import iou, miou
from .similarity import cosine_map, weighted_cosine_map
from .training import TrainConfig, train_head

__version__ = "0.1.0"
