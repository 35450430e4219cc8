from .observations import FREE_FLOAT_DIM, GIMBAL_DIM, JUMP_DIM
from .randomize import DomainRandomization, randomize_domain, sample_params
from .rewards import (
    COMPONENT_NAMES,
    FREE_FLOAT_COMPONENTS,
    GIMBAL_COMPONENTS,
    JUMP_COMPONENTS,
    compute_reward_components,
    total_reward,
)
from .tasks import (
    CounterweightEnv,
    FreeFloatAttitudeEnv,
    GimbalAttitudeEnv,
    JumpCeresEnv,
    TaskKind,
    VecTaskEnv,
    make_env,
    sample_command,
)
