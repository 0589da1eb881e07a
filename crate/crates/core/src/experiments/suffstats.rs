//! Approximate sufficient statistics for a noisy, relabelled qubit ensemble.
//!
//! The true conditional state depends on `x1` only. Each `(x1, x2)` carries
//! an estimate with relative errors of order `ν^{-1/2}`, and the classical
//! register is shuffled by a hidden permutation, so the obvious compression
//! "keep `x1`" is not available to the algorithm. The deterministic
//! bottleneck with `|T| = |X|` is compared against that oracle compression.

use std::fmt::Write as _;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cq::{mutual_info_xy, CQChannel, CQState, EntropicSummary, ObjectiveConfig};
use crate::error::{Error, Result};
use crate::experiments::ensemble::qubit_density;
use crate::qdib::run_qdib;
use crate::rng::{permutation, stream};
use crate::trace::{fmt_num, IterationTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStatsParams {
    pub size_x1: usize,
    pub size_x2: usize,
    /// Number of measurement repetitions; noise is uniform on `(-ν^{-1/2}, ν^{-1/2})`.
    pub nu: f64,
    pub perm_seed: u64,
    pub noise_seed: u64,
}

impl SuffStatsParams {
    /// `|X1| = 5`, `|X2| = 20`, `ν = 20`, both seeds set to `seed`.
    pub fn new(seed: u64) -> Self {
        Self {
            size_x1: 5,
            size_x2: 20,
            nu: 20.0,
            perm_seed: seed,
            noise_seed: seed,
        }
    }

    pub fn size_x(&self) -> usize {
        self.size_x1 * self.size_x2
    }
}

#[derive(Debug, Clone)]
pub struct SuffStatsEnsemble {
    pub params: SuffStatsParams,
    pub state: CQState,
    /// `permutation[x1·|X2| + x2]` is the state index of `(x1, x2)`.
    pub permutation: Vec<usize>,
    /// Number of `λ` estimates clamped into `[0, 1]`.
    pub clamped: usize,
}

/// `θ = π x1/|X1| (1 + r)`, `λ = x1/(4|X1|) (1 + r')`, uniform `P_X`, and
/// the classical index relabelled by a seeded permutation.
pub fn gen_suffstats_ensemble(params: &SuffStatsParams) -> Result<SuffStatsEnsemble> {
    if !(params.nu > 0.0) {
        return Err(Error::InvalidParameter("nu must be positive".into()));
    }
    if params.size_x1 == 0 || params.size_x2 == 0 {
        return Err(Error::InvalidParameter(
            "|X1| and |X2| must be positive".into(),
        ));
    }
    let n = params.size_x();
    let half_width = 1.0 / params.nu.sqrt();
    let mut rng = stream(params.noise_seed, "suffstats-noise", 0);
    let mut clamped = 0;
    let mut rhos = Vec::with_capacity(n);
    for x1 in 0..params.size_x1 {
        let base_theta = std::f64::consts::PI * x1 as f64 / params.size_x1 as f64;
        let base_lambda = x1 as f64 / (4.0 * params.size_x1 as f64);
        for _ in 0..params.size_x2 {
            let r = noise(&mut rng, half_width);
            let r2 = noise(&mut rng, half_width);
            let theta = base_theta * (1.0 + r);
            let raw_lambda = base_lambda * (1.0 + r2);
            let lambda = raw_lambda.clamp(0.0, 1.0);
            if lambda != raw_lambda {
                clamped += 1;
            }
            rhos.push(qubit_density(theta, lambda)?);
        }
    }
    if clamped > 0 {
        warn!("{clamped} noisy lambda estimates clamped into [0, 1]");
    }
    let perm = permutation(n, &mut stream(params.perm_seed, "suffstats-permutation", 0));
    let state = CQState::uniform(rhos)?.permuted(&perm)?;
    Ok(SuffStatsEnsemble {
        params: params.clone(),
        state,
        permutation: perm,
        clamped,
    })
}

// Uniform on the open interval (-w, w).
fn noise<R: Rng>(rng: &mut R, w: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    loop {
        let v = rng.random_range(-w..w);
        if v != -w {
            return v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub f_dib: f64,
    pub i_x1y: f64,
    pub h_t: f64,
}

/// The oracle compression that undoes the permutation and keeps `x1`.
pub fn baseline_discard_x2(ensemble: &SuffStatsEnsemble, beta: f64) -> Result<BaselineMetrics> {
    let n2 = ensemble.params.size_x2;
    let mut map = vec![0; ensemble.state.size_x()];
    for (orig, &s) in ensemble.permutation.iter().enumerate() {
        map[s] = orig / n2;
    }
    let channel = CQChannel::deterministic(&map, ensemble.params.size_x1)?;
    let s = EntropicSummary::compute(&ensemble.state, &channel)?;
    Ok(BaselineMetrics {
        f_dib: s.f_alpha(0.0, beta),
        i_x1y: s.i_ty(),
        h_t: s.h_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStatsMetrics {
    pub beta: f64,
    pub f_dib: f64,
    pub h_t: f64,
    pub i_ty: f64,
    pub i_xy: f64,
    /// `I(X:Y) - I(T:Y)`: the achieved sufficiency slack.
    pub epsilon: f64,
    pub support_t: usize,
    pub iterations: usize,
    pub baseline: BaselineMetrics,
    /// First iteration whose `f_DIB` is below the baseline value.
    pub first_below_baseline: Option<usize>,
    pub clamped_lambdas: usize,
}

#[derive(Debug, Clone)]
pub struct SuffStatsOutcome {
    pub metrics: SuffStatsMetrics,
    pub trace: IterationTrace,
    pub channel: CQChannel,
    pub ensemble: SuffStatsEnsemble,
}

impl SuffStatsOutcome {
    /// Columns `iter, f_dib_qdib, f_dib_baseline`.
    pub fn fdib_csv(&self) -> String {
        let mut out = String::from("iter,f_dib_qdib,f_dib_baseline\n");
        for r in &self.trace.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.iter,
                fmt_num(r.f),
                fmt_num(self.metrics.baseline.f_dib)
            );
        }
        out.push_str(&self.trace.status_line());
        out
    }

    /// Columns `iter, I_TY, I_X1Y_baseline, I_XY`.
    pub fn info_csv(&self) -> String {
        let mut out = String::from("iter,I_TY,I_X1Y_baseline,I_XY\n");
        for r in &self.trace.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iter,
                fmt_num(r.i_ty),
                fmt_num(self.metrics.baseline.i_x1y),
                fmt_num(self.metrics.i_xy)
            );
        }
        out.push_str(&self.trace.status_line());
        out
    }
}

/// Default run parameters: `β = 20`, `|T| = |X|`, classical `T`.
pub fn default_suffstats_config(params: &SuffStatsParams) -> ObjectiveConfig {
    ObjectiveConfig::new(0.0, 20.0, params.size_x()).with_classical(true)
}

pub fn suffstats_pipeline(
    params: &SuffStatsParams,
    config: &ObjectiveConfig,
) -> Result<SuffStatsOutcome> {
    let ensemble = gen_suffstats_ensemble(params)?;
    let baseline = baseline_discard_x2(&ensemble, config.beta)?;
    let i_xy = mutual_info_xy(&ensemble.state)?;
    let (channel, trace) = run_qdib(&ensemble.state, config)?;
    let last = *trace.last().expect("trace has an initial row");
    let first_below_baseline = trace
        .rows
        .iter()
        .find(|r| r.f < baseline.f_dib)
        .map(|r| r.iter);
    Ok(SuffStatsOutcome {
        metrics: SuffStatsMetrics {
            beta: config.beta,
            f_dib: last.f,
            h_t: last.h_t,
            i_ty: last.i_ty,
            i_xy,
            epsilon: i_xy - last.i_ty,
            support_t: last.support_t.unwrap_or(0),
            iterations: trace.len(),
            baseline,
            first_below_baseline,
            clamped_lambdas: ensemble.clamped,
        },
        trace,
        channel,
        ensemble,
    })
}
