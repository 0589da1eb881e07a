//! Reproducible pipelines: random qubit ensembles with γ and β sweeps,
//! kernel classification with bottleneck feature maps, and approximate
//! sufficient statistics via the deterministic bottleneck.

pub mod classify;
pub mod ensemble;
pub mod suffstats;
pub mod sweeps;

pub use classify::{
    classify_pipeline, empirical_cq_state, gen_classifier_dataset, hs_kernel, train_classifier,
    ClassifierParams, ClassifyConfig, ClassifyMetrics, ClassifyOutcome, GridPrediction,
    KernelClassifier, LabeledDataset, Record, Split,
};
pub use ensemble::{gen_random_qubit_ensemble, qubit_density, QubitEnsembleDraw};
pub use suffstats::{
    baseline_discard_x2, default_suffstats_config, gen_suffstats_ensemble, suffstats_pipeline,
    BaselineMetrics, SuffStatsEnsemble, SuffStatsMetrics, SuffStatsOutcome, SuffStatsParams,
};
pub use sweeps::{beta_sweep, gamma_sweep, gamma_sweep_csv, BetaSweepRow, GammaRun};
