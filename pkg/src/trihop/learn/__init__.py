from .checkpoint import CheckpointError, build_policy, load_checkpoint, save_checkpoint
from .gae import gae
from .nets import ActorCritic, RunningNorm
from .ppo import PpoConfig, PpoTrainer, RolloutBatch, train
