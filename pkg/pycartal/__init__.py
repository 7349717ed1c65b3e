from .acquisition import AcquisitionRequest, SelectionResult, select_batch, select_random, select_least_confidence, \
    select_max_entropy, select_bald, select_dal, select_cal, select_hybrid_dal_cal
from .cartography import DynamicsLog, DataMapStats, CartographyLabels, compute_confidence, compute_variability, \
    compute_correctness, compute_datamap, assign_cartography_labels, classify_regions, datamap_density
from .config import ExperimentConfig
from .constants import Strategy, Mode, Architecture, Featurizer, Region, BonferroniMode, AsoMode, DEFAULT_SEEDS
from .data_io import RawDataset, EmbeddingTable, FeatureTable, load_dataset, load_embeddings, tokenize, featurize, \
    featurize_hashed, make_synthetic, build_pool, export_datamap, emit_svg_datamap, emit_svg_curves
from .exceptions import Error, ConfigError, ParameterError, ShapeError, TrainingError, DatasetError, \
    SelectionError, DegenerateLabelsError, StatisticsError, ExportError
from .models import MlpModel, AdamWState, PredictiveDistribution
from .rng import derive_rng
from .simulator import InstancePool, IterationRecord, RunHistory, run_experiment, run_experiments, run_seed, \
    stratified_seed_sample, evaluate, batch_statistics, threshold_sweep, full_data_reference
from .stats import ScoreSample, AsoResult, AsoMatrix, aso_test, aso_matrix, aso_per_iteration, batch_overlap, \
    overlap_report, score_samples

"""
pycartal.
Pool-based active learning experiments with data-map-driven (cartography) instance selection.
"""

__version__ = '0.1.0'
__all__ = ['AcquisitionRequest', 'SelectionResult', 'select_batch', 'select_random', 'select_least_confidence',
           'select_max_entropy', 'select_bald', 'select_dal', 'select_cal', 'select_hybrid_dal_cal',
           'DynamicsLog', 'DataMapStats', 'CartographyLabels', 'compute_confidence', 'compute_variability',
           'compute_correctness', 'compute_datamap', 'assign_cartography_labels', 'classify_regions',
           'datamap_density',
           'ExperimentConfig',
           'Strategy', 'Mode', 'Architecture', 'Featurizer', 'Region', 'BonferroniMode', 'AsoMode', 'DEFAULT_SEEDS',
           'RawDataset', 'EmbeddingTable', 'FeatureTable', 'load_dataset', 'load_embeddings', 'tokenize',
           'featurize', 'featurize_hashed', 'make_synthetic', 'build_pool', 'export_datamap', 'emit_svg_datamap',
           'emit_svg_curves',
           'Error', 'ConfigError', 'ParameterError', 'ShapeError', 'TrainingError', 'DatasetError',
           'SelectionError', 'DegenerateLabelsError', 'StatisticsError', 'ExportError',
           'MlpModel', 'AdamWState', 'PredictiveDistribution',
           'derive_rng',
           'InstancePool', 'IterationRecord', 'RunHistory', 'run_experiment', 'run_experiments', 'run_seed',
           'stratified_seed_sample', 'evaluate', 'batch_statistics', 'threshold_sweep', 'full_data_reference',
           'ScoreSample', 'AsoResult', 'AsoMatrix', 'aso_test', 'aso_matrix', 'aso_per_iteration', 'batch_overlap',
           'overlap_report', 'score_samples']
