from .figures import FIGURE_KINDS, FigureResult, FigureSpec, make_figure
from .logs import (
    EpisodeTable,
    LogFormatError,
    MissingColumnError,
    load_episodes,
    read_episode_csv,
    read_metrics_json,
    read_training_curve,
)
