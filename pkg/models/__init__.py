from .frame_models import EdgeLabel, PatchLabel, RgbdFrame, LabelFrame, Patch, PatchSet, SplitSpec, NormalizationStats
from .network_models import CnnModel, InitSchedule
from .config_models import DatasetConfig, TrainConfig, FusionConfig, FusionMode, RunConfig
from .training_models import EpochRecord
from .evaluation_models import ConfusionCounts, Metrics, EvaluationResult
from .fusion_models import Classification, Heatmap, FrameTiming
from .scene_models import RectKind, SceneRect, SceneSpec, SyntheticFrame

__all__ = [
    'EdgeLabel', 'PatchLabel', 'RgbdFrame', 'LabelFrame', 'Patch', 'PatchSet', 'SplitSpec', 'NormalizationStats', # frames
    'CnnModel', 'InitSchedule', # network
    'DatasetConfig', 'TrainConfig', 'FusionConfig', 'FusionMode', 'RunConfig', # config
    'EpochRecord', # training
    'ConfusionCounts', 'Metrics', 'EvaluationResult', # evaluation
    'Classification', 'Heatmap', 'FrameTiming', # fusion
    'RectKind', 'SceneRect', 'SceneSpec', 'SyntheticFrame', # synthetic scenes
    ]
