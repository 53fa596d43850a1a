"""duofield: a dual-branch neural scene model on synthetic dynamic scenes.

A bounded synthetic world is rendered by two trainable fields composited
along camera rays: a time-invariant background field and a time-conditioned
foreground field with a shadow head.  Everything runs on the CPU in float64
with hand-written backward passes, so gradients are exact and runs are
bit-reproducible from a seed.
"""

__version__ = "0.1.0"

from duofield.scene import SyntheticScene, generate_scene
from duofield.train import TrainConfig, train

__all__ = ["SyntheticScene", "generate_scene", "TrainConfig", "train", "__version__"]
