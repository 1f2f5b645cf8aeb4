"""Named synthetic benchmark settings shared by the CLI and the acceptance suite."""
from .data import SyntheticConfig
from .training import TrainConfig

# d/4 planted shared channels, a per-example offset nuisance that support
# adaptation can remove, and a feature scale small enough that the default
# Adam step settles within about ten experts.
BENCHMARK = SyntheticConfig(
    d=32,
    h=12,
    w=12,
    num_classes=80,
    noise_sigma=0.033,
    num_shared_dims=8,
    blob_count_range=(1, 3),
    blob_radius_range=(4, 10),
    stride=2,
    prototype_scale=0.1,
    offset_sigma=0.1,
)
BENCHMARK_EXAMPLES_PER_CLASS = 10
BENCHMARK_TRAIN = TrainConfig(learning_rate=0.1, iterations=2000, batch_size=8)

SMALL = SyntheticConfig(d=16, h=6, w=6, num_classes=8, num_shared_dims=4, stride=2, blob_radius_range=(2, 5))
SMALL_EXAMPLES_PER_CLASS = 6

PRESETS = {
    "benchmark": (BENCHMARK, BENCHMARK_EXAMPLES_PER_CLASS),
    "small": (SMALL, SMALL_EXAMPLES_PER_CLASS),
}
