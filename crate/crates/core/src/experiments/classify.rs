//! Kernel classification with bottleneck feature maps.
//!
//! The bottleneck channel `x ↦ σ_{T|x}` learned on the empirical training
//! distribution serves as a feature map; the classifier is one-vs-rest ridge
//! regression on the Hilbert-Schmidt kernel `Tr σ_{T|x} σ_{T|x'}`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cq::{CQChannel, CQState, ObjectiveConfig};
use crate::error::{Error, Result};
use crate::linalg::DensityOperator;
use crate::qib::run_qib;
use crate::rng::{permutation, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Noisy coordinates before flooring.
    pub x1_raw: f64,
    pub x2_raw: f64,
    pub x1: usize,
    pub x2: usize,
    pub y: usize,
    pub split: Split,
}

impl Record {
    pub fn cell(&self) -> (usize, usize) {
        (self.x1, self.x2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub records: usize,
    /// `|X2|`; `|X1|` equals the number of labels.
    pub size_x2: usize,
    pub num_labels: usize,
    pub train_fraction: f64,
    /// Upper end of the noise interval on the top boundary cells.
    pub wide_noise: f64,
    /// Apply a seeded permutation of the `X1 × X2` grid.
    pub permute: bool,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            records: 400,
            size_x2: 10,
            num_labels: 3,
            train_fraction: 0.5,
            wide_noise: 1.2,
            permute: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub records: Vec<Record>,
    pub num_labels: usize,
    /// `permutation[x1·|X2| + x2]` is the latent cell `π(x1, x2)`.
    pub permutation: Vec<usize>,
    pub size_x2: usize,
}

impl LabeledDataset {
    pub fn split(&self, split: Split) -> Vec<Record> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .copied()
            .collect()
    }
}

/// Draws `Y` uniformly, the latent cell `(x1', x2')` with `x1' = y` and
/// `Q(x2' | x1') = (δ(x1', x2') + 1)/(|X2| + 1)`, and reports the observed
/// cell `(x1, x2) = π^{-1}(x1', x2')` with coordinate noise `U[0, 1.2)` on
/// `x1 = |X1| - 1` (first coordinate) and `x2 = |X2| - 1` (second
/// coordinate), `U[0, 1)` elsewhere, floored.
pub fn gen_classifier_dataset(seed: u64, params: &ClassifierParams) -> Result<LabeledDataset> {
    let nl = params.num_labels;
    let n2 = params.size_x2;
    if params.records == 0 || nl == 0 || n2 == 0 {
        return Err(Error::EmptyDataset);
    }
    if nl > n2 {
        return Err(Error::InvalidParameter("need |X1| <= |X2|".into()));
    }
    if !(params.train_fraction > 0.0 && params.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    let cells = nl * n2;
    let perm = if params.permute {
        permutation(cells, &mut stream(seed, "classifier-permutation", 0))
    } else {
        (0..cells).collect()
    };
    let mut inverse = vec![0; cells];
    for (c, &p) in perm.iter().enumerate() {
        inverse[p] = c;
    }

    let mut rng = stream(seed, "classifier-data", 0);
    let mut records: Vec<Record> = (0..params.records)
        .map(|_| {
            let y = rng.random_range(0..nl);
            let u = rng.random_range(0..=n2);
            let latent_x2 = if u < n2 { u } else { y };
            let c = inverse[y * n2 + latent_x2];
            let (x1, x2) = (c / n2, c % n2);
            let w1 = if x1 == nl - 1 { params.wide_noise } else { 1.0 };
            let w2 = if x2 == n2 - 1 { params.wide_noise } else { 1.0 };
            let x1_raw = x1 as f64 + rng.random_range(0.0..w1);
            let x2_raw = x2 as f64 + rng.random_range(0.0..w2);
            Record {
                x1_raw,
                x2_raw,
                x1: x1_raw.floor() as usize,
                x2: x2_raw.floor() as usize,
                y,
                split: Split::Test,
            }
        })
        .collect();
    let order = permutation(params.records, &mut stream(seed, "classifier-split", 0));
    let n_train = (params.records as f64 * params.train_fraction).round() as usize;
    for &i in &order[..n_train] {
        records[i].split = Split::Train;
    }
    Ok(LabeledDataset {
        records,
        num_labels: nl,
        permutation: perm,
        size_x2: n2,
    })
}

/// Empirical c-q state: `P̂(x)` from cell counts and diagonal label
/// densities `P̂(y | x)`. Cells are sorted lexicographically; the second
/// return value lists them in state order.
pub fn empirical_cq_state(
    records: &[Record],
    num_labels: usize,
) -> Result<(CQState, Vec<(usize, usize)>)> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cells: Vec<(usize, usize)> = records.iter().map(Record::cell).collect();
    cells.sort_unstable();
    cells.dedup();
    let mut counts = vec![vec![0usize; num_labels]; cells.len()];
    for r in records {
        if r.y >= num_labels {
            return Err(Error::InvalidParameter(format!(
                "label {} outside 0..{num_labels}",
                r.y
            )));
        }
        let i = cells.binary_search(&r.cell()).expect("cell was collected");
        counts[i][r.y] += 1;
    }
    let total = records.len() as f64;
    let px: Vec<f64> = counts
        .iter()
        .map(|c| c.iter().sum::<usize>() as f64 / total)
        .collect();
    let rhos = counts
        .iter()
        .map(|c| {
            let n: usize = c.iter().sum();
            let p: Vec<f64> = c.iter().map(|&k| k as f64 / n as f64).collect();
            DensityOperator::from_probabilities(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((CQState::new(px, rhos)?, cells))
}

/// `Tr σ_{T|x} σ_{T|x2}`.
pub fn hs_kernel(channel: &CQChannel, x: usize, x2: usize) -> f64 {
    let s = channel.sigma_t_given_x();
    s[x].op().trace_product(s[x2].op())
}

/// One-vs-rest kernel ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelClassifier {
    /// `coefficients[c][i]` multiplies `K(x_i, ·)` in the score of class `c`.
    pub coefficients: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl KernelClassifier {
    pub fn scores(&self, kernel_row: &[f64]) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.bias)
            .map(|(a, b)| a.iter().zip(kernel_row).map(|(a, k)| a * k).sum::<f64>() + b)
            .collect()
    }

    /// Class with the largest score; ties go to the smaller label.
    pub fn predict(&self, kernel_row: &[f64]) -> usize {
        let s = self.scores(kernel_row);
        let mut best = 0;
        for (c, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = c;
            }
        }
        best
    }
}

/// For each class `c`, solves `(G + ridge·I) a = z` with `z_i = ±1`
/// depending on whether `labels[i] = c`, and sets `b = mean(z - G a)`.
pub fn train_classifier(
    gram: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    ridge: f64,
) -> Result<KernelClassifier> {
    let n = gram.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != n || gram.iter().any(|r| r.len() != n) {
        return Err(Error::SizeMismatch(
            "gram matrix and labels disagree".into(),
        ));
    }
    let g = DMatrix::from_fn(n, n, |i, j| gram[i][j]);
    let asym = (&g - g.transpose()).amax();
    if asym > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "gram matrix not symmetric ({asym:e})"
        )));
    }
    let regularized = &g + DMatrix::identity(n, n) * ridge;
    let chol = regularized
        .cholesky()
        .ok_or(Error::SingularSystem { ridge })?;
    let mut coefficients = Vec::with_capacity(num_classes);
    let mut bias = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let z = DVector::from_fn(n, |i, _| if labels[i] == c { 1.0 } else { -1.0 });
        let a = chol.solve(&z);
        let b = (&z - &g * &a).mean();
        coefficients.push(a.iter().copied().collect());
        bias.push(b);
    }
    Ok(KernelClassifier { coefficients, bias })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub objective: ObjectiveConfig,
    pub ridge: f64,
    pub dataset: ClassifierParams,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::new(1.0, 15.0, 2).with_gamma(1.0),
            ridge: 1e-3,
            dataset: ClassifierParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyMetrics {
    pub f_quantum: f64,
    pub f_classical: f64,
    pub acc_quantum: f64,
    pub acc_classical: f64,
    pub acc_linear_ref: f64,
    pub train_acc_quantum: f64,
    pub train_acc_classical: f64,
    pub iterations_quantum: usize,
    pub iterations_classical: usize,
    /// Test records whose cell never occurs in training.
    pub unseen_test_records: usize,
}

/// Predicted labels on the integer grid of observed cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPrediction {
    pub x1: usize,
    pub x2: usize,
    pub quantum: usize,
    pub classical: usize,
    pub linear_ref: usize,
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub metrics: ClassifyMetrics,
    pub grid: Vec<GridPrediction>,
    pub dataset: LabeledDataset,
    pub state: CQState,
    pub quantum_channel: CQChannel,
    pub classical_channel: CQChannel,
}

/// Feature states per record, falling back to `I/dimT` for cells absent from
/// the training distribution.
struct FeatureMap<'a> {
    channel: &'a CQChannel,
    cells: &'a [(usize, usize)],
    fallback: DensityOperator,
}

impl<'a> FeatureMap<'a> {
    fn new(channel: &'a CQChannel, cells: &'a [(usize, usize)]) -> Self {
        Self {
            channel,
            cells,
            fallback: DensityOperator::maximally_mixed(channel.dim_t()),
        }
    }

    fn state(&self, cell: (usize, usize)) -> &DensityOperator {
        match self.cells.binary_search(&cell) {
            Ok(i) => &self.channel.sigma_t_given_x()[i],
            Err(_) => &self.fallback,
        }
    }
}

fn kernel_rows<F>(queries: &[Record], train: &[Record], kernel: &F) -> Vec<Vec<f64>>
where
    F: Fn(&Record, &Record) -> f64 + Sync,
{
    queries
        .par_iter()
        .map(|q| train.iter().map(|t| kernel(q, t)).collect())
        .collect()
}

fn accuracy(clf: &KernelClassifier, rows: &[Vec<f64>], records: &[Record]) -> f64 {
    let hits = rows
        .iter()
        .zip(records)
        .filter(|(row, r)| clf.predict(row) == r.y)
        .count();
    hits as f64 / records.len().max(1) as f64
}

struct Fitted {
    clf: KernelClassifier,
    train_acc: f64,
    test_acc: f64,
}

fn fit<F>(
    train: &[Record],
    test: &[Record],
    num_labels: usize,
    ridge: f64,
    kernel: &F,
) -> Result<Fitted>
where
    F: Fn(&Record, &Record) -> f64 + Sync,
{
    let gram = kernel_rows(train, train, kernel);
    let labels: Vec<usize> = train.iter().map(|r| r.y).collect();
    let clf = train_classifier(&gram, &labels, num_labels, ridge)?;
    let train_acc = accuracy(&clf, &gram, train);
    let test_acc = accuracy(&clf, &kernel_rows(test, train, kernel), test);
    Ok(Fitted {
        clf,
        train_acc,
        test_acc,
    })
}

/// Bottleneck runs with quantum and classical `T` (identical seed and
/// parameters), kernel classifiers on both feature maps, and a linear kernel
/// on the raw coordinates as reference.
pub fn classify_pipeline(seed: u64, config: &ClassifyConfig) -> Result<ClassifyOutcome> {
    let dataset = gen_classifier_dataset(seed, &config.dataset)?;
    let train = dataset.split(Split::Train);
    let test = dataset.split(Split::Test);
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let nl = dataset.num_labels;
    let (state, cells) = empirical_cq_state(&train, nl)?;

    let objective = config.objective.clone().with_seed(seed);
    let (q_channel, q_trace) = run_qib(&state, &objective.clone().with_classical(false))?;
    let (c_channel, c_trace) = run_qib(&state, &objective.with_classical(true))?;

    let unseen = test
        .iter()
        .filter(|r| cells.binary_search(&r.cell()).is_err())
        .count();
    if unseen > 0 {
        warn!("{unseen} test records fall on cells absent from training; using the maximally mixed feature");
    }

    let q_map = FeatureMap::new(&q_channel, &cells);
    let c_map = FeatureMap::new(&c_channel, &cells);
    let q_kernel = |a: &Record, b: &Record| {
        q_map
            .state(a.cell())
            .op()
            .trace_product(q_map.state(b.cell()).op())
    };
    let c_kernel = |a: &Record, b: &Record| {
        c_map
            .state(a.cell())
            .op()
            .trace_product(c_map.state(b.cell()).op())
    };
    let l_kernel = |a: &Record, b: &Record| a.x1_raw * b.x1_raw + a.x2_raw * b.x2_raw;

    let q_fit = fit(&train, &test, nl, config.ridge, &q_kernel)?;
    let c_fit = fit(&train, &test, nl, config.ridge, &c_kernel)?;
    let l_fit = fit(&train, &test, nl, config.ridge, &l_kernel)?;

    let max_x1 = dataset.records.iter().map(|r| r.x1).max().unwrap_or(0);
    let max_x2 = dataset.records.iter().map(|r| r.x2).max().unwrap_or(0);
    let mut grid = Vec::new();
    for x1 in 0..=max_x1 {
        for x2 in 0..=max_x2 {
            let probe = Record {
                x1_raw: x1 as f64 + 0.5,
                x2_raw: x2 as f64 + 0.5,
                x1,
                x2,
                y: 0,
                split: Split::Test,
            };
            let row = |k: &dyn Fn(&Record, &Record) -> f64| -> Vec<f64> {
                train.iter().map(|t| k(&probe, t)).collect()
            };
            grid.push(GridPrediction {
                x1,
                x2,
                quantum: q_fit.clf.predict(&row(&q_kernel)),
                classical: c_fit.clf.predict(&row(&c_kernel)),
                linear_ref: l_fit.clf.predict(&row(&l_kernel)),
            });
        }
    }

    Ok(ClassifyOutcome {
        metrics: ClassifyMetrics {
            f_quantum: q_trace.final_f(),
            f_classical: c_trace.final_f(),
            acc_quantum: q_fit.test_acc,
            acc_classical: c_fit.test_acc,
            acc_linear_ref: l_fit.test_acc,
            train_acc_quantum: q_fit.train_acc,
            train_acc_classical: c_fit.train_acc,
            iterations_quantum: q_trace.len(),
            iterations_classical: c_trace.len(),
            unseen_test_records: unseen,
        },
        grid,
        dataset,
        state,
        quantum_channel: q_channel,
        classical_channel: c_channel,
    })
}
