"""Overlap-region detection and class-conditional synthesis for imbalanced
tabular classification.

The pipeline: detect boundary-overlapping majority rows with a k-fold
forest committee, relabel the data ternary, fit a class-conditional
generator on the finer labels, and train classifiers on balanced synthetic
clear-majority and minority samples evaluated against real held-out data.
"""

from .dataset import (ColumnSchema, SplitSpec, Standardizer, TabularDataset,
                      load_csv, load_schema, one_hot, standardize,
                      stratified_split, write_csv, write_schema)
from .experiments import (EvalReport, PipelineConfig, ablate_augmentation,
                          ablate_before_after, ablate_overlap_removal,
                          bench_overlap, emit_report, run_efficacy)
from .generators import (AdasynGenerator, BorderlineSmoteGenerator,
                         ExternalBridgeGenerator, GmmGenerator, SmoteGenerator,
                         adasyn, borderline_smote, external_bridge, fit_gmm,
                         gmm_sample, smote)
from .learners import (AdaBoost, DecisionTree, GradientBoosting,
                       LogisticRegression, MlpClassifier, RandomForest)
from .metrics import (BinaryConfusion, auc, classification_metrics, confusion,
                      paired_t_test, threshold_sweep)
from .modeling import ClassifierAdapter
from .oracle import (BlobWorld, OracleScore, bayes_label, blobs1, blobs2,
                     make_blobs, score_synthetic, trained_oracle_score)
from .overlap import (OverlapConfig, OverlapDetector, OverlapResult,
                      detect_overlap, kfold_partition, select_tau, sweep_tau)

__version__ = "0.1.0"
