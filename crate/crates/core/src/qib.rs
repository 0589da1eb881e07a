//! Accelerated QIB iteration.
//!
//! For a channel `σ` the engine evaluates the operator family
//!
//! ```text
//! F_α[σ](x) = -ln σ_T + α ln σ_{T|x} + β Tr_Y[(I ⊗ ρ_{Y|x})(ln(σ_T ⊗ ρ_Y) - ln σ_YT)]
//! ```
//!
//! and updates `σ_{T|x} ∝ exp(ln σ_{T|x} - F_α[σ](x)/γ)`. The `Y`-contraction is
//! insensitive to where `ρ_{Y|x}` is placed (left, right or split as
//! `ρ^{1/2}·ρ^{1/2}`) because an operator acting only on the traced factor
//! can be cycled under the partial trace, so the result is Hermitian up to
//! rounding. Since `ln(σ_T ⊗ ρ_Y) = ln σ_T ⊗ I + I ⊗ ln ρ_Y`, the contraction
//! splits into `ln σ_T + Tr(ρ_{Y|x} ln ρ_Y)·I - Tr_Y[(I ⊗ ρ_{Y|x}) ln σ_YT]`.

use log::debug;

use crate::cq::{
    channel_divergence, channel_trace_distance, relative_entropy, rho_y, sigma_t, sigma_yt,
    CQChannel, CQState, EntropicSummary, ObjectiveConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{
    contract_second, exp_normalized, hermitize, matrix_log_supported, ComplexMatrix,
    DensityOperator, HermitianOperator, LOG_FLOOR,
};
use crate::rng::{dirichlet_ones, random_unitary, stream};
use crate::trace::{IterationTrace, TraceKind, TraceRow};

/// Denominators of the γ-ratio at or below this value make it undefined.
pub const RATIO_DENOMINATOR_MIN: f64 = 1e-12;

/// Operators on `T`, one per classical symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct FOperatorFamily {
    pub members: Vec<HermitianOperator>,
}

impl FOperatorFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `Σ_x P_X(x) Tr σ_{T|x} F(x)`.
    pub fn expectation(&self, state: &CQState, channel: &CQChannel) -> f64 {
        state
            .support()
            .map(|(x, p)| {
                p * channel.sigma_t_given_x()[x]
                    .op()
                    .trace_product(&self.members[x])
            })
            .sum()
    }
}

/// Quantities of the state that do not depend on the channel.
#[derive(Debug, Clone)]
pub(crate) struct StateData {
    pub rho_y: DensityOperator,
    /// `Tr ρ_{Y|x} ln ρ_Y` per symbol.
    pub cross_log: Vec<f64>,
}

impl StateData {
    pub fn new(state: &CQState) -> Result<Self> {
        let rho_y = rho_y(state);
        let log_rho_y = matrix_log_supported(&rho_y, LOG_FLOOR)?;
        let cross_log = state
            .rho_y_given_x()
            .iter()
            .map(|r| r.op().trace_product(&log_rho_y))
            .collect();
        Ok(Self { rho_y, cross_log })
    }
}

/// Everything the iteration needs to know about one channel: the entropic
/// summary and `F_0[σ](x) = -ln σ_T + β B[σ](x)`, where `B` is the
/// `Y`-contraction term. `F_α = F_0 + α ln σ_{T|x}`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub summary: EntropicSummary,
    pub sigma_t: DensityOperator,
    pub f0: Vec<HermitianOperator>,
}

impl Evaluation {
    pub fn new(state: &CQState, data: &StateData, channel: &CQChannel, beta: f64) -> Result<Self> {
        let st = sigma_t(channel, state)?;
        let syt = sigma_yt(channel, state)?;
        let summary = EntropicSummary::from_parts(state, channel, &st, &syt, &data.rho_y)?;
        let log_st = matrix_log_supported(&st, LOG_FLOOR)?;
        let log_syt = matrix_log_supported(&syt, LOG_FLOOR)?;
        let dim_t = channel.dim_t();
        let identity = ComplexMatrix::identity(dim_t);
        let f0 = state
            .rho_y_given_x()
            .iter()
            .zip(&data.cross_log)
            .map(|(rho, &c)| {
                // F_0 = (β - 1) ln σ_T + β c_x I - β Tr_Y[(I ⊗ ρ) ln σ_YT]
                let contracted = contract_second(log_syt.matrix(), rho.matrix())?;
                let mut m = log_st.matrix().scale(beta - 1.0);
                m.add_scaled(&identity, beta * c);
                m.add_scaled(&contracted, -beta);
                Ok(hermitize(&m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            summary,
            sigma_t: st,
            f0,
        })
    }

    pub fn f_alpha(&self, alpha: f64, beta: f64) -> f64 {
        self.summary.f_alpha(alpha, beta)
    }

    /// `F_α(x)` for every `x`.
    pub fn family(&self, channel: &CQChannel, alpha: f64) -> Result<FOperatorFamily> {
        let members = self
            .f0
            .iter()
            .zip(channel.sigma_t_given_x())
            .map(|(f0, s)| {
                if alpha == 0.0 {
                    return Ok(f0.clone());
                }
                let mut m = f0.matrix().clone();
                m.add_scaled(matrix_log_supported(s, LOG_FLOOR)?.matrix(), alpha);
                Ok(hermitize(&m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FOperatorFamily { members })
    }

    /// `σ̂_{T|x} ∝ exp((1 - α/γ) ln σ_{T|x} - F_0(x)/γ)`.
    pub fn update(&self, channel: &CQChannel, gamma: f64, alpha: f64) -> Result<CQChannel> {
        let keep = 1.0 - alpha / gamma;
        let sigmas = self
            .f0
            .iter()
            .zip(channel.sigma_t_given_x())
            .enumerate()
            .map(|(x, (f0, s))| {
                let mut m = f0.matrix().scale(-1.0 / gamma);
                if keep != 0.0 {
                    m.add_scaled(matrix_log_supported(s, LOG_FLOOR)?.matrix(), keep);
                }
                if !m.is_finite() {
                    return Err(Error::NonFiniteExponent { x });
                }
                if channel.is_classical() {
                    m = m.project_diagonal();
                }
                exp_normalized(&hermitize(&m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CQChannel::from_parts_unchecked(
            sigmas,
            channel.is_classical(),
        ))
    }
}

fn check_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha}, beta = {beta} must be finite and nonnegative"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    Ok(())
}

fn evaluate(state: &CQState, channel: &CQChannel, beta: f64) -> Result<Evaluation> {
    let data = StateData::new(state)?;
    Evaluation::new(state, &data, channel, beta)
}

/// The family `F_α[σ](x)`.
pub fn f_operator(
    state: &CQState,
    channel: &CQChannel,
    alpha: f64,
    beta: f64,
) -> Result<FOperatorFamily> {
    check_params(alpha, beta)?;
    evaluate(state, channel, beta)?.family(channel, alpha)
}

/// One accelerated update with parameter `γ`.
pub fn update(
    state: &CQState,
    channel: &CQChannel,
    gamma: f64,
    alpha: f64,
    beta: f64,
) -> Result<CQChannel> {
    check_params(alpha, beta)?;
    check_gamma(gamma)?;
    evaluate(state, channel, beta)?.update(channel, gamma, alpha)
}

fn ratio_from_parts(
    state: &CQState,
    channel: &CQChannel,
    f_new: &FOperatorFamily,
    f_old: &FOperatorFamily,
    divergence: f64,
) -> Result<f64> {
    if !(divergence > RATIO_DENOMINATOR_MIN) {
        return Err(Error::UndefinedRatio(divergence));
    }
    let numerator = f_new.expectation(state, channel) - f_old.expectation(state, channel);
    Ok(numerator / divergence)
}

/// `Σ_x P_X Tr σ_{T|x}(F_α[σ](x) - F_α[σ'](x)) / Σ_x P_X D(σ_{T|x} ‖ σ'_{T|x})`.
pub fn gamma_ratio(
    state: &CQState,
    channel: &CQChannel,
    channel2: &CQChannel,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_params(alpha, beta)?;
    let divergence = channel_divergence(channel, channel2, state)?;
    if !(divergence > RATIO_DENOMINATOR_MIN) {
        return Err(Error::UndefinedRatio(divergence));
    }
    let data = StateData::new(state)?;
    let f1 = Evaluation::new(state, &data, channel, beta)?.family(channel, alpha)?;
    let f2 = Evaluation::new(state, &data, channel2, beta)?.family(channel2, alpha)?;
    ratio_from_parts(state, channel, &f1, &f2, divergence)
}

/// `J(σ, σ') = γ Σ_x P_X D(σ_{T|x} ‖ σ'_{T|x}) + Σ_x P_X Tr σ_{T|x} F_α[σ'](x)`.
pub fn j_function(
    state: &CQState,
    channel: &CQChannel,
    channel2: &CQChannel,
    gamma: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_params(alpha, beta)?;
    check_gamma(gamma)?;
    let f2 = f_operator(state, channel2, alpha, beta)?;
    Ok(gamma * channel_divergence(channel, channel2, state)? + f2.expectation(state, channel))
}

/// `Σ_x P_X ‖σ̂_{T|x}[σ] - σ_{T|x}‖_1`.
pub fn fixed_point_residual(
    state: &CQState,
    channel: &CQChannel,
    gamma: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let next = update(state, channel, gamma, alpha, beta)?;
    channel_trace_distance(&next, channel, state)
}

/// A full-rank random channel: Dirichlet(1) spectrum, conjugated by a Haar
/// unitary unless `classical`.
pub fn random_channel(
    dim_t: usize,
    size_x: usize,
    classical: bool,
    seed: u64,
) -> Result<CQChannel> {
    if dim_t == 0 || size_x == 0 {
        return Err(Error::InvalidParameter(
            "dimT and |X| must be positive".into(),
        ));
    }
    let mut rng = stream(seed, "random-channel", 0);
    let sigmas = (0..size_x)
        .map(|_| {
            let p = dirichlet_ones(dim_t, &mut rng);
            let d = DensityOperator::from_probabilities(&p)?;
            Ok(if classical {
                d
            } else {
                d.conjugate(&random_unitary(dim_t, &mut rng))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CQChannel::new(sigmas, classical)
}

/// Runs the iteration from a seeded random channel.
pub fn run_qib(state: &CQState, config: &ObjectiveConfig) -> Result<(CQChannel, IterationTrace)> {
    config.validate()?;
    let initial = random_channel(config.dim_t, state.size_x(), config.classical, config.seed)?;
    run_qib_from(state, config, initial)
}

/// Runs the iteration from a given initial channel.
pub fn run_qib_from(
    state: &CQState,
    config: &ObjectiveConfig,
    initial: CQChannel,
) -> Result<(CQChannel, IterationTrace)> {
    config.validate()?;
    if initial.size_x() != state.size_x() || initial.dim_t() != config.dim_t {
        return Err(Error::SizeMismatch(format!(
            "initial channel is {}x{}, expected {}x{}",
            initial.size_x(),
            initial.dim_t(),
            state.size_x(),
            config.dim_t
        )));
    }
    let (alpha, beta, gamma) = (config.alpha, config.beta, config.gamma);
    let data = StateData::new(state)?;
    let mut trace = IterationTrace::new(TraceKind::Qib);

    let mut channel = initial;
    let mut eval = Evaluation::new(state, &data, &channel, beta)?;
    let mut family = eval.family(&channel, alpha)?;
    trace.push(row(1, &eval, alpha, beta, f64::NAN, f64::NAN, f64::NAN));

    let mut reached_tol = false;
    for iter in 2..=config.max_iters + 1 {
        let next = eval.update(&channel, gamma, alpha)?;
        let next_eval = Evaluation::new(state, &data, &next, beta)?;
        let next_family = next_eval.family(&next, alpha)?;

        let step_divergence = channel_divergence(&channel, &next, state)?;
        let back = channel_divergence(&next, &channel, state)?;
        let ratio = ratio_from_parts(state, &next, &next_family, &family, back).unwrap_or(f64::NAN);
        let residual = channel_trace_distance(&next, &channel, state)?;
        let r = row(
            iter,
            &next_eval,
            alpha,
            beta,
            step_divergence,
            ratio,
            residual,
        );
        let delta = r.f - trace.final_f();
        trace.push(r);

        channel = next;
        eval = next_eval;
        family = next_family;
        if delta.abs() <= config.tol {
            reached_tol = true;
            break;
        }
    }
    trace.finish(reached_tol);
    debug!(
        "run_qib: {} after {} rows, f = {}",
        trace.status.as_str(),
        trace.len(),
        trace.final_f()
    );
    Ok((channel, trace))
}

fn row(
    iter: usize,
    eval: &Evaluation,
    alpha: f64,
    beta: f64,
    step_divergence: f64,
    gamma_ratio: f64,
    fixed_point_residual: f64,
) -> TraceRow {
    let s = &eval.summary;
    TraceRow {
        iter,
        f: eval.f_alpha(alpha, beta),
        h_t: s.h_t,
        i_tx: s.i_tx(),
        i_ty: s.i_ty(),
        step_divergence,
        gamma_ratio,
        fixed_point_residual,
        support_t: None,
    }
}

fn mixture(state: &CQState, q: &[f64]) -> DensityOperator {
    let mut acc = ComplexMatrix::zeros(state.dim_y());
    for (r, &w) in state.rho_y_given_x().iter().zip(q) {
        if w > 0.0 {
            acc.add_scaled(r.matrix(), w);
        }
    }
    DensityOperator::new_unchecked(hermitize(&acc))
}

fn classical_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

// Mixing weight that keeps smoothed simplex vertices strictly inside the
// simplex, where the classical divergence stays finite.
const VERTEX_SMOOTHING: f64 = 1e-2;

/// Lower bound on the contraction coefficient
/// `κ = sup D(Σ_x Q ρ_{Y|x} ‖ Σ_x Q' ρ_{Y|x}) / D(Q ‖ Q')` from `samples`
/// Dirichlet(1) pairs, plus all ordered pairs of smoothed simplex vertices
/// when `|X| ≤ 8`. The result is clamped to at most one.
pub fn estimate_kappa(state: &CQState, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let n = state.size_x();
    if n < 2 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    let mut consider = |q: &[f64], q2: &[f64]| -> Result<()> {
        let dx = classical_divergence(q, q2);
        if dx > RATIO_DENOMINATOR_MIN {
            let dy = relative_entropy(&mixture(state, q), &mixture(state, q2))?;
            if dy.is_finite() {
                best = best.max(dy / dx);
            }
        }
        Ok(())
    };
    let mut rng = stream(seed, "kappa", 0);
    for _ in 0..samples {
        let q = dirichlet_ones(n, &mut rng);
        let q2 = dirichlet_ones(n, &mut rng);
        consider(&q, &q2)?;
    }
    if n <= 8 {
        let vertex = |i: usize| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    let base = VERTEX_SMOOTHING / n as f64;
                    if i == j {
                        1.0 - VERTEX_SMOOTHING + base
                    } else {
                        base
                    }
                })
                .collect()
        };
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    consider(&vertex(i), &vertex(j))?;
                }
            }
        }
    }
    Ok(best.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::objective_f_alpha;
    use crate::linalg::{partial_trace, sqrt_psd, tensor, Keep};
    use crate::rng::{random_unitary, seeded_rng};
    use rand::Rng;

    fn random_density(dim: usize, rng: &mut impl Rng) -> DensityOperator {
        let p = dirichlet_ones(dim, rng);
        let u = random_unitary(dim, rng);
        DensityOperator::from_probabilities(&p)
            .unwrap()
            .conjugate(&u)
    }

    fn random_state(seed: u64, size_x: usize, dim_y: usize) -> CQState {
        let mut rng = seeded_rng(seed);
        let px = dirichlet_ones(size_x, &mut rng);
        CQState::new(
            px,
            (0..size_x)
                .map(|_| random_density(dim_y, &mut rng))
                .collect(),
        )
        .unwrap()
    }

    fn product_state(size_x: usize, dim_y: usize, seed: u64) -> CQState {
        let mut rng = seeded_rng(seed);
        let r = random_density(dim_y, &mut rng);
        CQState::uniform(vec![r; size_x]).unwrap()
    }

    fn max_member_diff(a: &FOperatorFamily, b: &FOperatorFamily) -> f64 {
        a.members
            .iter()
            .zip(&b.members)
            .map(|(x, y)| (x.matrix() - y.matrix()).frobenius_norm())
            .fold(0.0, f64::max)
    }

    /// F_α built literally: symmetric sandwich, explicit tensor logs and a
    /// partial trace.
    fn f_operator_literal(
        state: &CQState,
        ch: &CQChannel,
        alpha: f64,
        beta: f64,
    ) -> FOperatorFamily {
        let dt = ch.dim_t();
        let dy = state.dim_y();
        let st = sigma_t(ch, state).unwrap();
        let ry = rho_y(state);
        let syt = sigma_yt(ch, state).unwrap();
        let prod = DensityOperator::from_matrix(tensor(st.matrix(), ry.matrix())).unwrap();
        let l = &matrix_log_supported(&prod, LOG_FLOOR)
            .unwrap()
            .into_matrix()
            - matrix_log_supported(&syt, LOG_FLOOR).unwrap().matrix();
        let log_st = matrix_log_supported(&st, LOG_FLOOR).unwrap();
        let members = (0..state.size_x())
            .map(|x| {
                let half = tensor(
                    &ComplexMatrix::identity(dt),
                    sqrt_psd(&state.rho_y_given_x()[x]).unwrap().matrix(),
                );
                let inner = half.matmul(&l).matmul(&half);
                let contracted = partial_trace(&inner, (dt, dy), Keep::First).unwrap();
                let log_sx = matrix_log_supported(&ch.sigma_t_given_x()[x], LOG_FLOOR).unwrap();
                let mut m = log_st.matrix().scale(-1.0);
                m.add_scaled(log_sx.matrix(), alpha);
                m.add_scaled(&contracted, beta);
                hermitize(&m)
            })
            .collect();
        FOperatorFamily { members }
    }

    #[test]
    fn f_operator_matches_literal_sandwich() {
        for seed in 0..20 {
            let state = random_state(seed, 2 + seed as usize % 4, 1 + seed as usize % 3);
            let ch = random_channel(2 + seed as usize % 2, state.size_x(), false, seed).unwrap();
            for &(a, b) in &[(0.0, 0.5), (0.5, 2.0), (1.0, 10.0)] {
                let f = f_operator(&state, &ch, a, b).unwrap();
                let lit = f_operator_literal(&state, &ch, a, b);
                assert!(max_member_diff(&f, &lit) < 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn f_operator_on_product_state_is_scalar() {
        let state = product_state(3, 2, 1);
        let ch = CQChannel::constant(DensityOperator::maximally_mixed(3), 3, false).unwrap();
        let alpha = 0.4;
        let f = f_operator(&state, &ch, alpha, 5.0).unwrap();
        let expect = ComplexMatrix::identity(3).scale((1.0 - alpha) * 3f64.ln());
        for m in &f.members {
            assert!((m.matrix() - &expect).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn f_operator_beta_zero() {
        let state = random_state(4, 3, 2);
        let ch = random_channel(3, 3, false, 4).unwrap();
        let f = f_operator(&state, &ch, 1.0, 0.0).unwrap();
        let log_st = matrix_log_supported(&sigma_t(&ch, &state).unwrap(), LOG_FLOOR).unwrap();
        for (x, m) in f.members.iter().enumerate() {
            let lx = matrix_log_supported(&ch.sigma_t_given_x()[x], LOG_FLOOR).unwrap();
            let expect = lx.matrix() - log_st.matrix();
            assert!((m.matrix() - &expect).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn expectation_identity() {
        for seed in 0..30 {
            let state = random_state(50 + seed, 1 + seed as usize % 6, 1 + seed as usize % 3);
            let ch =
                random_channel(1 + seed as usize % 4, state.size_x(), seed % 2 == 0, seed).unwrap();
            for &a in &[0.0, 0.5, 1.0] {
                for &b in &[0.5, 2.0, 10.0] {
                    let f = objective_f_alpha(&state, &ch, a, b).unwrap();
                    let e = f_operator(&state, &ch, a, b)
                        .unwrap()
                        .expectation(&state, &ch);
                    assert!((f - e).abs() < 1e-8, "seed {seed}: {f} vs {e}");
                }
            }
        }
    }

    /// Update rule of the original α = 1 algorithm, built from the literal
    /// formula with non-symmetric placement of ρ_{Y|x}.
    fn acy_update(state: &CQState, ch: &CQChannel, beta: f64) -> Vec<ComplexMatrix> {
        let dt = ch.dim_t();
        let dy = state.dim_y();
        let st = sigma_t(ch, state).unwrap();
        let syt = sigma_yt(ch, state).unwrap();
        let ry = rho_y(state);
        let log_st = matrix_log_supported(&st, LOG_FLOOR).unwrap();
        let log_ry_full = tensor(
            &ComplexMatrix::identity(dt),
            matrix_log_supported(&ry, LOG_FLOOR).unwrap().matrix(),
        );
        let diff = &log_ry_full - matrix_log_supported(&syt, LOG_FLOOR).unwrap().matrix();
        (0..state.size_x())
            .map(|x| {
                let left = tensor(
                    &ComplexMatrix::identity(dt),
                    state.rho_y_given_x()[x].matrix(),
                );
                let c = partial_trace(&left.matmul(&diff), (dt, dy), Keep::First).unwrap();
                let mut m = log_st.matrix().scale(1.0 - beta);
                m.add_scaled(&c, -beta);
                let e = crate::linalg::matrix_exp(&hermitize(&m)).unwrap();
                let tr = e.trace();
                e.matrix().scale(1.0 / tr)
            })
            .collect()
    }

    #[test]
    fn gamma_alpha_one_reproduces_original_update() {
        for seed in 0..15 {
            let state = random_state(70 + seed, 2 + seed as usize % 4, 2);
            let ch = random_channel(2, state.size_x(), false, seed).unwrap();
            let beta = 1.0 + seed as f64 * 0.3;
            let ours = update(&state, &ch, 1.0, 1.0, beta).unwrap();
            let oracle = acy_update(&state, &ch, beta);
            for (s, o) in ours.sigma_t_given_x().iter().zip(&oracle) {
                assert!((s.matrix() - o).frobenius_norm() < 1e-10, "seed {seed}");
            }
        }
    }

    /// Update for probability vectors with the per-symbol divergence term:
    /// `τ(t|x) ∝ exp((1/α) ln p(t) - (β/α) Σ_y p(y|x)(ln p(y|x) - ln p(y|t)))`.
    fn tishby_update(
        px: &[f64],
        py_x: &[Vec<f64>],
        pt_x: &[Vec<f64>],
        alpha: f64,
        beta: f64,
    ) -> Vec<Vec<f64>> {
        let nt = pt_x[0].len();
        let ny = py_x[0].len();
        let pt: Vec<f64> = (0..nt)
            .map(|t| px.iter().zip(pt_x).map(|(p, c)| p * c[t]).sum())
            .collect();
        let py_t: Vec<Vec<f64>> = (0..nt)
            .map(|t| {
                (0..ny)
                    .map(|y| {
                        px.iter()
                            .enumerate()
                            .map(|(x, p)| p * pt_x[x][t] * py_x[x][y])
                            .sum::<f64>()
                            / pt[t]
                    })
                    .collect()
            })
            .collect();
        (0..px.len())
            .map(|x| {
                let logits: Vec<f64> = (0..nt)
                    .map(|t| {
                        let kl: f64 = (0..ny)
                            .filter(|&y| py_x[x][y] > 0.0)
                            .map(|y| py_x[x][y] * (py_x[x][y].ln() - py_t[t][y].ln()))
                            .sum();
                        pt[t].ln() / alpha - beta / alpha * kl
                    })
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|v| v / z).collect()
            })
            .collect()
    }

    #[test]
    fn classical_update_matches_tishby_rule() {
        for seed in 0..20 {
            let mut rng = seeded_rng(900 + seed);
            let nx = 2 + seed as usize % 5;
            let ny = 2 + seed as usize % 3;
            let nt = 2 + seed as usize % 3;
            let px = dirichlet_ones(nx, &mut rng);
            let py_x: Vec<Vec<f64>> = (0..nx).map(|_| dirichlet_ones(ny, &mut rng)).collect();
            let pt_x: Vec<Vec<f64>> = (0..nx).map(|_| dirichlet_ones(nt, &mut rng)).collect();
            let state = CQState::new(
                px.clone(),
                py_x.iter()
                    .map(|p| DensityOperator::from_probabilities(p).unwrap())
                    .collect(),
            )
            .unwrap();
            let ch = CQChannel::new(
                pt_x.iter()
                    .map(|p| DensityOperator::from_probabilities(p).unwrap())
                    .collect(),
                true,
            )
            .unwrap();
            let alpha = [1.0, 0.5, 2.0][seed as usize % 3];
            let beta = 3.0;
            let ours = update(&state, &ch, alpha, alpha, beta).unwrap();
            let oracle = tishby_update(&px, &py_x, &pt_x, alpha, beta);
            for (s, o) in ours.sigma_t_given_x().iter().zip(&oracle) {
                assert!(s.matrix().max_off_diagonal() == 0.0);
                for (t, &v) in o.iter().enumerate() {
                    assert!((s.matrix()[(t, t)].re - v).abs() < 1e-10, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn product_state_fixed_point() {
        let state = product_state(4, 2, 3);
        let ch = CQChannel::constant(DensityOperator::maximally_mixed(3), 4, false).unwrap();
        let next = update(&state, &ch, 0.7, 1.0, 4.0).unwrap();
        for s in next.sigma_t_given_x() {
            assert!(
                (s.matrix() - DensityOperator::maximally_mixed(3).matrix()).frobenius_norm()
                    < 1e-12
            );
        }
        assert!(fixed_point_residual(&state, &ch, 0.7, 1.0, 4.0).unwrap() < 1e-12);
    }

    #[test]
    fn update_is_unitarily_covariant() {
        for seed in 0..10 {
            let state = random_state(120 + seed, 3, 2);
            let ch = random_channel(3, 3, false, seed).unwrap();
            let u = random_unitary(3, &mut seeded_rng(seed));
            let a = update(&state, &ch.conjugated(&u), 0.8, 0.6, 3.0).unwrap();
            let b = update(&state, &ch, 0.8, 0.6, 3.0).unwrap().conjugated(&u);
            for (s, t) in a.sigma_t_given_x().iter().zip(b.sigma_t_given_x()) {
                assert!((s.matrix() - t.matrix()).frobenius_norm() < 1e-8);
            }
        }
    }

    #[test]
    fn gamma_ratio_constant_channels() {
        let state = random_state(5, 4, 2);
        let mut rng = seeded_rng(6);
        for &alpha in &[0.0, 0.5, 1.0] {
            let a = CQChannel::constant(random_density(3, &mut rng), 4, false).unwrap();
            let b = CQChannel::constant(random_density(3, &mut rng), 4, false).unwrap();
            let r = gamma_ratio(&state, &a, &b, alpha, 7.0).unwrap();
            assert!((r - (alpha - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_ratio_on_product_state() {
        let state = product_state(3, 2, 8);
        let a = random_channel(2, 3, false, 1).unwrap();
        let b = random_channel(2, 3, false, 2).unwrap();
        let alpha = 0.7;
        let r = gamma_ratio(&state, &a, &b, alpha, 5.0).unwrap();
        let expect = alpha
            - relative_entropy(&sigma_t(&a, &state).unwrap(), &sigma_t(&b, &state).unwrap())
                .unwrap()
                / channel_divergence(&a, &b, &state).unwrap();
        assert!((r - expect).abs() < 1e-9);
        assert!(r <= alpha);
    }

    #[test]
    fn gamma_ratio_undefined_for_equal_channels() {
        let state = random_state(5, 2, 2);
        let a = random_channel(2, 2, false, 1).unwrap();
        assert!(matches!(
            gamma_ratio(&state, &a, &a, 1.0, 1.0),
            Err(Error::UndefinedRatio(_))
        ));
    }

    #[test]
    fn j_function_diagonal_and_decomposition() {
        for seed in 0..10 {
            let state = random_state(300 + seed, 3, 2);
            let a = random_channel(2, 3, false, 10 + seed).unwrap();
            let b = random_channel(2, 3, false, 20 + seed).unwrap();
            let (gamma, alpha, beta) = (0.9, 0.8, 3.0);
            let f = objective_f_alpha(&state, &a, alpha, beta).unwrap();
            assert!((j_function(&state, &a, &a, gamma, alpha, beta).unwrap() - f).abs() < 1e-8);

            // J(σ,σ') = γ Σ P D(σ‖σ̂[σ']) - γ Σ P ln η̂(x), with η̂ the
            // normalizer of exp(ln σ' - F[σ']/γ).
            let fam = f_operator(&state, &b, alpha, beta).unwrap();
            let hat = update(&state, &b, gamma, alpha, beta).unwrap();
            let mut log_eta = 0.0;
            for (x, p) in state.support() {
                let mut m = matrix_log_supported(&b.sigma_t_given_x()[x], LOG_FLOOR)
                    .unwrap()
                    .into_matrix();
                m.add_scaled(fam.members[x].matrix(), -1.0 / gamma);
                let eta = crate::linalg::matrix_exp(&hermitize(&m)).unwrap().trace();
                log_eta += p * eta.ln();
            }
            let rhs = gamma * channel_divergence(&a, &hat, &state).unwrap() - gamma * log_eta;
            let j = j_function(&state, &a, &b, gamma, alpha, beta).unwrap();
            assert!((j - rhs).abs() < 1e-8, "seed {seed}: {j} vs {rhs}");

            // the update minimizes J(·, σ')
            let jh = j_function(&state, &hat, &b, gamma, alpha, beta).unwrap();
            assert!(jh <= j + 1e-10);
        }
    }

    #[test]
    fn classical_closure() {
        let state = random_state(2, 4, 2);
        let ch = random_channel(3, 4, true, 2).unwrap();
        let next = update(&state, &ch, 0.5, 1.0, 6.0).unwrap();
        assert!(next.is_classical());
        for s in next.sigma_t_given_x() {
            assert_eq!(s.matrix().max_off_diagonal(), 0.0);
        }
    }

    #[test]
    fn random_channel_is_valid_and_deterministic() {
        let a = random_channel(4, 3, false, 11).unwrap();
        let b = random_channel(4, 3, false, 11).unwrap();
        assert_eq!(a, b);
        for s in a.sigma_t_given_x() {
            let ev = s.eigenvalues().unwrap();
            assert!(ev[0] > 0.0);
            assert!((s.op().trace() - 1.0).abs() < 1e-12);
        }
        assert!(random_channel(4, 3, true, 11).unwrap().is_classical());
    }

    #[test]
    fn product_state_run_converges_immediately() {
        let state = product_state(5, 2, 4);
        for &alpha in &[0.0, 0.5, 1.0] {
            let cfg = ObjectiveConfig::new(alpha, 3.0, 3).with_gamma(1.0);
            let init = CQChannel::constant(DensityOperator::maximally_mixed(3), 5, false).unwrap();
            let (_, trace) = run_qib_from(&state, &cfg, init).unwrap();
            assert_eq!(trace.len(), 2);
            assert!(trace.reached_tol);
            assert!((trace.final_f() - (1.0 - alpha) * 3f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn run_is_monotone_with_safe_gamma() {
        for seed in 0..10 {
            let state = random_state(500 + seed, 4, 2);
            let cfg = ObjectiveConfig::new(1.0, 4.0, 2)
                .with_seed(seed)
                .with_tol(1e-10);
            let (ch, trace) = run_qib(&state, &cfg).unwrap();
            assert!(trace.violations.is_empty());
            for d in trace.deltas() {
                assert!(d <= 1e-9);
            }
            assert!(fixed_point_residual(&state, &ch, 1.0, 1.0, 4.0).unwrap() < 1e-5);
        }
    }

    #[test]
    fn collapsing_iterates_keep_finite_diagnostics() {
        // γ well below α drives eigenvalues far under the log floor.
        let state = random_state(31, 5, 2);
        let cfg = ObjectiveConfig::new(0.5, 5.0, 2)
            .with_gamma(0.15)
            .with_max_iters(40);
        let (ch, trace) = run_qib(&state, &cfg).unwrap();
        let smallest = ch
            .sigma_t_given_x()
            .iter()
            .map(|s| s.eigenvalues().unwrap()[0])
            .fold(f64::INFINITY, f64::min);
        assert!(smallest < LOG_FLOOR);
        for r in &trace.rows[1..] {
            assert!(r.step_divergence.is_finite(), "row {}", r.iter);
            assert!(r.gamma_ratio.is_nan() || r.gamma_ratio > 0.0);
        }
    }

    #[test]
    fn kappa_bounds() {
        let same = product_state(4, 2, 1);
        assert!(estimate_kappa(&same, 50, 1).unwrap() < 1e-12);
        let orth = CQState::uniform(
            (0..3)
                .map(|i| {
                    let mut p = vec![0.0; 3];
                    p[i] = 1.0;
                    DensityOperator::from_probabilities(&p).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let k = estimate_kappa(&orth, 50, 1).unwrap();
        assert!((k - 1.0).abs() < 1e-9);
        let k = estimate_kappa(&random_state(3, 5, 2), 200, 3).unwrap();
        assert!(k > 0.0 && k <= 1.0);
    }
}
