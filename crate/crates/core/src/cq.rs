//! Classical-quantum states, c-q channels, and the entropic functionals of
//! the bottleneck objective.
//!
//! Joint operators on `T ⊗ Y` always put `T` first. Entropies are in nats.
//! Symbols `x` with `P_X(x) = 0` are skipped in every sum.

use std::sync::atomic::{AtomicBool, Ordering};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_distribution, partial_trace, tensor, ComplexMatrix, DensityOperator, HermitianOperator,
    Keep, LOG_FLOOR,
};

/// Off-diagonal magnitude allowed in a classical (diagonal) channel.
pub const CLASSICAL_OFFDIAG_TOL: f64 = 1e-12;

// Weight that a state may put on the floored kernel of the second argument
// of a relative entropy before it is reported as infinite.
const SUPPORT_TOL: f64 = 1e-9;

/// `Σ_x P_X(x) |x⟩⟨x| ⊗ ρ_{Y|x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CQState {
    px: Vec<f64>,
    rho_y_given_x: Vec<DensityOperator>,
    dim_y: usize,
}

impl CQState {
    pub fn new(px: Vec<f64>, rho_y_given_x: Vec<DensityOperator>) -> Result<Self> {
        check_distribution(&px)?;
        if rho_y_given_x.len() != px.len() {
            return Err(Error::SizeMismatch(format!(
                "{} probabilities but {} conditional states",
                px.len(),
                rho_y_given_x.len()
            )));
        }
        let dim_y = rho_y_given_x[0].dim();
        if let Some((i, r)) = rho_y_given_x
            .iter()
            .enumerate()
            .find(|(_, r)| r.dim() != dim_y)
        {
            return Err(Error::SizeMismatch(format!(
                "rho_y_given_x[{i}] has dimension {} instead of {dim_y}",
                r.dim()
            )));
        }
        Ok(Self {
            px,
            rho_y_given_x,
            dim_y,
        })
    }

    /// Uniform `P_X` over the given conditional states.
    pub fn uniform(rho_y_given_x: Vec<DensityOperator>) -> Result<Self> {
        let n = rho_y_given_x.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        Self::new(vec![1.0 / n as f64; n], rho_y_given_x)
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn rho_y_given_x(&self) -> &[DensityOperator] {
        &self.rho_y_given_x
    }

    pub fn size_x(&self) -> usize {
        self.px.len()
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    /// Indices with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.px
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }

    /// True when every `ρ_{Y|x}` is diagonal.
    pub fn is_classical_y(&self) -> bool {
        self.rho_y_given_x
            .iter()
            .all(|r| r.is_diagonal(CLASSICAL_OFFDIAG_TOL))
    }

    /// Relabels the classical register: entry `x` moves to `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.size_x();
        if perm.len() != n {
            return Err(Error::SizeMismatch(format!(
                "permutation of length {} for |X| = {n}",
                perm.len()
            )));
        }
        let mut px = vec![0.0; n];
        let mut rhos: Vec<Option<DensityOperator>> = vec![None; n];
        for (x, &target) in perm.iter().enumerate() {
            if target >= n || rhos[target].is_some() {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            px[target] = self.px[x];
            rhos[target] = Some(self.rho_y_given_x[x].clone());
        }
        Self::new(px, rhos.into_iter().map(|r| r.expect("filled")).collect())
    }
}

/// A c-q channel: one density on `T` per classical symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CQChannel {
    sigma_t_given_x: Vec<DensityOperator>,
    dim_t: usize,
    classical: bool,
}

impl CQChannel {
    pub fn new(sigma_t_given_x: Vec<DensityOperator>, classical: bool) -> Result<Self> {
        let Some(first) = sigma_t_given_x.first() else {
            return Err(Error::SizeMismatch("channel with no symbols".into()));
        };
        let dim_t = first.dim();
        for (i, s) in sigma_t_given_x.iter().enumerate() {
            if s.dim() != dim_t {
                return Err(Error::SizeMismatch(format!(
                    "sigma_t_given_x[{i}] has dimension {} instead of {dim_t}",
                    s.dim()
                )));
            }
            if classical && !s.is_diagonal(CLASSICAL_OFFDIAG_TOL) {
                return Err(Error::InvalidDensity(format!(
                    "sigma_t_given_x[{i}] is not diagonal but the channel is classical"
                )));
            }
        }
        Ok(Self {
            sigma_t_given_x,
            dim_t,
            classical,
        })
    }

    /// `σ_{T|x} = τ` for every `x`.
    pub fn constant(tau: DensityOperator, size_x: usize, classical: bool) -> Result<Self> {
        Self::new(vec![tau; size_x], classical)
    }

    /// Deterministic classical channel `x ↦ |g(x)⟩⟨g(x)|`.
    pub fn deterministic(map: &[usize], dim_t: usize) -> Result<Self> {
        let sigmas = map
            .iter()
            .map(|&t| {
                if t >= dim_t {
                    return Err(Error::InvalidParameter(format!(
                        "target {t} outside 0..{dim_t}"
                    )));
                }
                let mut p = vec![0.0; dim_t];
                p[t] = 1.0;
                DensityOperator::from_probabilities(&p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigmas, true)
    }

    pub fn sigma_t_given_x(&self) -> &[DensityOperator] {
        &self.sigma_t_given_x
    }

    pub fn size_x(&self) -> usize {
        self.sigma_t_given_x.len()
    }

    pub fn dim_t(&self) -> usize {
        self.dim_t
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    /// `U σ_{T|x} U†` for every `x`; the result is flagged quantum.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        Self {
            sigma_t_given_x: self
                .sigma_t_given_x
                .iter()
                .map(|s| s.conjugate(u))
                .collect(),
            dim_t: self.dim_t,
            classical: false,
        }
    }

    pub(crate) fn from_parts_unchecked(
        sigma_t_given_x: Vec<DensityOperator>,
        classical: bool,
    ) -> Self {
        let dim_t = sigma_t_given_x[0].dim();
        Self {
            sigma_t_given_x,
            dim_t,
            classical,
        }
    }
}

/// Parameters of one bottleneck run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dim_t: usize,
    pub classical: bool,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl ObjectiveConfig {
    /// `γ = α` (the always-safe choice), `tol = 1e-8`, 500 iterations.
    pub fn new(alpha: f64, beta: f64, dim_t: usize) -> Self {
        Self {
            alpha,
            beta,
            gamma: if alpha > 0.0 { alpha } else { 1.0 },
            dim_t,
            classical: false,
            tol: 1e-8,
            max_iters: 500,
            seed: 0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_classical(mut self, classical: bool) -> Self {
        self.classical = classical;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a finite value >= 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be a finite value >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be > 0");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be > 0");
        }
        if self.dim_t == 0 {
            return bad("dimT must be positive");
        }
        Ok(())
    }
}

fn check_sizes(channel: &CQChannel, state: &CQState) -> Result<()> {
    if channel.size_x() != state.size_x() {
        return Err(Error::SizeMismatch(format!(
            "channel has {} symbols, state has {}",
            channel.size_x(),
            state.size_x()
        )));
    }
    Ok(())
}

/// `σ_T = Σ_x P_X(x) σ_{T|x}`.
pub fn sigma_t(channel: &CQChannel, state: &CQState) -> Result<DensityOperator> {
    check_sizes(channel, state)?;
    let mut acc = ComplexMatrix::zeros(channel.dim_t());
    for (x, p) in state.support() {
        acc.add_scaled(channel.sigma_t_given_x[x].matrix(), p);
    }
    Ok(DensityOperator::new_unchecked(
        HermitianOperator::hermitize(&acc),
    ))
}

/// `σ_{YT} = Σ_x P_X(x) σ_{T|x} ⊗ ρ_{Y|x}` with `T` as the first factor.
pub fn sigma_yt(channel: &CQChannel, state: &CQState) -> Result<DensityOperator> {
    check_sizes(channel, state)?;
    let mut acc = ComplexMatrix::zeros(channel.dim_t() * state.dim_y());
    for (x, p) in state.support() {
        let term = tensor(
            channel.sigma_t_given_x[x].matrix(),
            state.rho_y_given_x[x].matrix(),
        );
        acc.add_scaled(&term, p);
    }
    Ok(DensityOperator::new_unchecked(
        HermitianOperator::hermitize(&acc),
    ))
}

/// `ρ_Y = Σ_x P_X(x) ρ_{Y|x}`.
pub fn rho_y(state: &CQState) -> DensityOperator {
    let mut acc = ComplexMatrix::zeros(state.dim_y());
    for (x, p) in state.support() {
        acc.add_scaled(state.rho_y_given_x[x].matrix(), p);
    }
    DensityOperator::new_unchecked(HermitianOperator::hermitize(&acc))
}

/// `-Σ λ ln λ` over the (clamped) eigenvalues, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    Ok(entropy_of_spectrum(&rho.eigenvalues()?))
}

pub(crate) fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum()
}

static SUPPORT_WARNED: AtomicBool = AtomicBool::new(false);

/// `Tr ρ (ln ρ - ln σ)` with supported logarithms. Returns `+∞` when `ρ`
/// puts more than `1e-9` weight on the floored kernel of `σ`; the first such
/// event per process is logged as a warning, later ones at debug level.
/// A `σ` produced by [`exp_normalized`](crate::linalg::exp_normalized) has an
/// exact log spectrum and is treated as full rank.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let neg_entropy = -von_neumann_entropy(rho)?;
    let eig = sigma.spectral()?;
    let (logs, exact) = sigma.log_eigenvalues(LOG_FLOOR)?;
    let r = rho.matrix();
    let n = rho.dim();
    let mut cross = 0.0;
    let mut kernel_weight = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        // ⟨v_k| ρ |v_k⟩
        let mut w = 0.0;
        for i in 0..n {
            let vi = eig.eigenvectors[(i, k)];
            if vi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                w += (vi.conj() * r[(i, j)] * eig.eigenvectors[(j, k)]).re;
            }
        }
        if !exact && lambda <= LOG_FLOOR {
            kernel_weight += w;
        }
        cross += w * logs[k];
    }
    if kernel_weight > SUPPORT_TOL {
        if SUPPORT_WARNED.swap(true, Ordering::Relaxed) {
            debug!(
                "relative entropy: support violation (weight {kernel_weight:e} outside support)"
            );
        } else {
            warn!(
                "relative entropy: support violation (weight {kernel_weight:e} outside support); \
                 further occurrences are logged at debug level"
            );
        }
        return Ok(f64::INFINITY);
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// Entropic summary of one channel on one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicSummary {
    pub h_t: f64,
    pub h_t_given_x: f64,
    pub h_y: f64,
    pub h_yt: f64,
}

impl EntropicSummary {
    pub fn compute(state: &CQState, channel: &CQChannel) -> Result<Self> {
        let st = sigma_t(channel, state)?;
        let syt = sigma_yt(channel, state)?;
        Self::from_parts(state, channel, &st, &syt, &rho_y(state))
    }

    pub(crate) fn from_parts(
        state: &CQState,
        channel: &CQChannel,
        sigma_t: &DensityOperator,
        sigma_yt: &DensityOperator,
        rho_y: &DensityOperator,
    ) -> Result<Self> {
        let mut h_t_given_x = 0.0;
        for (x, p) in state.support() {
            h_t_given_x += p * von_neumann_entropy(&channel.sigma_t_given_x[x])?;
        }
        Ok(Self {
            h_t: von_neumann_entropy(sigma_t)?,
            h_t_given_x,
            h_y: von_neumann_entropy(rho_y)?,
            h_yt: von_neumann_entropy(sigma_yt)?,
        })
    }

    pub fn i_tx(&self) -> f64 {
        self.h_t - self.h_t_given_x
    }

    pub fn i_ty(&self) -> f64 {
        self.h_t + self.h_y - self.h_yt
    }

    /// `H(T) - α H(T|X) - β I(T:Y)`.
    pub fn f_alpha(&self, alpha: f64, beta: f64) -> f64 {
        self.h_t - alpha * self.h_t_given_x - beta * self.i_ty()
    }
}

/// `f_α = H(T) - α H(T|X) - β I(T:Y)` in nats.
pub fn objective_f_alpha(
    state: &CQState,
    channel: &CQChannel,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    Ok(EntropicSummary::compute(state, channel)?.f_alpha(alpha, beta))
}

/// `I(T:X) = H(σ_T) - Σ_x P_X(x) H(σ_{T|x})`.
pub fn mutual_info_tx(state: &CQState, channel: &CQChannel) -> Result<f64> {
    Ok(EntropicSummary::compute(state, channel)?.i_tx())
}

/// `I(T:Y) = H(σ_T) + H(ρ_Y) - H(σ_{YT})`.
pub fn mutual_info_ty(state: &CQState, channel: &CQChannel) -> Result<f64> {
    Ok(EntropicSummary::compute(state, channel)?.i_ty())
}

/// `H(T|X) = Σ_x P_X(x) H(σ_{T|x})`.
pub fn cond_entropy_t_given_x(state: &CQState, channel: &CQChannel) -> Result<f64> {
    Ok(EntropicSummary::compute(state, channel)?.h_t_given_x)
}

/// `I(X:Y) = H(ρ_Y) - Σ_x P_X(x) H(ρ_{Y|x})`.
pub fn mutual_info_xy(state: &CQState) -> Result<f64> {
    let mut cond = 0.0;
    for (x, p) in state.support() {
        cond += p * von_neumann_entropy(&state.rho_y_given_x[x])?;
    }
    Ok(von_neumann_entropy(&rho_y(state))? - cond)
}

/// `Σ_x P_X(x) D(σ_{T|x} ‖ σ'_{T|x})`.
pub fn channel_divergence(channel: &CQChannel, other: &CQChannel, state: &CQState) -> Result<f64> {
    check_sizes(channel, state)?;
    check_sizes(other, state)?;
    if channel.dim_t() != other.dim_t() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim_t(),
            found: other.dim_t(),
        });
    }
    let mut acc = 0.0;
    for (x, p) in state.support() {
        acc += p * relative_entropy(&channel.sigma_t_given_x[x], &other.sigma_t_given_x[x])?;
    }
    Ok(acc)
}

/// `Σ_x P_X(x) ‖σ_{T|x} - σ'_{T|x}‖_1`.
pub fn channel_trace_distance(
    channel: &CQChannel,
    other: &CQChannel,
    state: &CQState,
) -> Result<f64> {
    check_sizes(channel, state)?;
    let mut acc = 0.0;
    for (x, p) in state.support() {
        let diff = channel.sigma_t_given_x[x].matrix() - other.sigma_t_given_x[x].matrix();
        acc += p * diff.trace_norm_hermitian()?;
    }
    Ok(acc)
}

/// Partial trace of `σ_{YT}` onto `T`.
pub fn trace_out_y(
    sigma_yt: &DensityOperator,
    dim_t: usize,
    dim_y: usize,
) -> Result<ComplexMatrix> {
    partial_trace(sigma_yt.matrix(), (dim_t, dim_y), Keep::First)
}

/// Partial trace of `σ_{YT}` onto `Y`.
pub fn trace_out_t(
    sigma_yt: &DensityOperator,
    dim_t: usize,
    dim_y: usize,
) -> Result<ComplexMatrix> {
    partial_trace(sigma_yt.matrix(), (dim_t, dim_y), Keep::Second)
}
