"""Clip feature extractors, aggregation, score regression and the model bundle."""
from .aggregation import (
    AGGREGATIONS,
    WeightDecider,
    aggregate,
    aggregate_average,
    aggregate_weighted,
    weight_decider_forward,
)
from .backbone import (
    Backbone,
    BackboneConfig,
    build_backbone,
    count_parameters,
    extract_clip_feature,
)
from .bundle import AQAModel, build_model, load_checkpoint, save_checkpoint
from .scoring import LinearRegressor, ScorePrediction, predict_score, score_loss

__all__ = [
    'AGGREGATIONS', 'WeightDecider', 'aggregate', 'aggregate_average', 'aggregate_weighted',
    'weight_decider_forward', 'Backbone', 'BackboneConfig', 'build_backbone', 'count_parameters',
    'extract_clip_feature', 'AQAModel', 'build_model', 'load_checkpoint', 'save_checkpoint',
    'LinearRegressor', 'ScorePrediction', 'predict_score', 'score_loss',
]
