"""Voted feature weighting ensembles for photovoltaic power forecasting."""
from .baselines import GnbModel, KnnModel, fit_gnb, fit_knn, predict_gnb, predict_knn
from .cart import RegressionTree, TreeHyperparams, fit_tree, predict_tree
from .dataset import (Dataset, SplitSpec, SynthConfig, add_lag_features, add_noise_feature,
                      clean, load_csv, save_csv, split, synth_generate)
from .ensemble import BaggingConfig, Ensemble, fit_bagging, fit_boosted, fit_forest, predict_ensemble
from .errors import ConvergenceWarning, VfwError
from .evaluation import (BiasVarianceReport, CvResult, MetricReport, bias_variance_estimate,
                         compare_models, kfold_cv, mae, r2, rmse)
from .importance import (ImportanceConfig, ImportanceVector, LimeConfig, VoteProportions,
                         boosting_gain_importance, combine_importance, compute_importances,
                         elastic_net_importance, lime_explain_local, lime_global_importance,
                         permutation_importance)
from .linear import ElasticNetConfig, LinearModel, fit_elastic_net
from .models import ModelSpec, load_model, save_model
from .vfw import VfwConfig, VfwModel, fit_vfw, predict_vfw, recombination_weights, reweight_features

__version__ = "0.1.0"
