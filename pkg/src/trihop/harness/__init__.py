from .episode_log import COLUMNS, EpisodeLog, EpisodeLogWriter, LogSchemaError, read_episode_log, replay
from .experiment import ExperimentSpec, IncompatibilityError, NoValidEpisodesError, run_experiment
from .metrics import EpisodeMetrics, MetricsReport, episode_metrics, summarize
