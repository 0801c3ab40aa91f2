"""Adaptive multistage empirical Bayes tests for sequential A/B testing."""
from .avpv import AvpvState, PriorSpec, bh, optimizely_run
from .estimate import FitOptions, FittedModel, estimate_proportion, fit_model, npmle_deconvolve, recover_alternative
from .lfdr import LfdrState
from .metrics import Confusion, MetricsReport, aggregate, fdp, stopping_time_metrics
from .model import GaussianMixture, GroundTruth, TwoGroupsModel
from .procedures import (DecisionRecord, FirstRejection, FixedHorizon, ProcedureConfig, StopAt,
                         bayes_threshold, compound_threshold, run, simple_threshold, weighted_loss)

__version__ = "0.1.0"
