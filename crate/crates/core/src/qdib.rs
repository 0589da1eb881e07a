//! Quantum deterministic bottleneck: the `α → 0` projector iteration.
//!
//! Each step projects `σ_{T|x}` onto the eigenspace of `F_0[σ](x)` belonging
//! to its smallest eigenvalue (equivalently the top eigenspace of the score
//! `-F_0`) and renormalizes.

use log::debug;

use crate::cq::{channel_trace_distance, CQChannel, CQState, ObjectiveConfig};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, HermitianOperator};
use crate::qib::{random_channel, Evaluation, FOperatorFamily, StateData};
use crate::trace::{IterationTrace, TraceKind, TraceRow};

/// Eigenvalues within this fraction of the spectral spread of the extreme
/// one are kept in the projector.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;

/// Overlaps `Tr σ P` at or below this value trigger the `P / Tr P` update.
pub const OVERLAP_MIN: f64 = 1e-14;

/// Eigenvalues of `σ_T` above this count towards its support.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A projector together with its rank and the eigenvalue gap to the rest of
/// the spectrum (`+∞` when it is the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub matrix: ComplexMatrix,
    pub rank: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreProjectorFamily {
    pub members: Vec<Projector>,
}

/// `(1 - β) ln σ_T + β Tr_Y[(I ⊗ ρ_{Y|x})(ln σ_YT - I ⊗ ln ρ_Y)]`, i.e. `-F_0(x)`.
pub fn score_operator(state: &CQState, channel: &CQChannel, beta: f64) -> Result<FOperatorFamily> {
    let data = StateData::new(state)?;
    let eval = Evaluation::new(state, &data, channel, beta)?;
    Ok(FOperatorFamily {
        members: eval.f0.iter().map(|f| f.scale(-1.0)).collect(),
    })
}

/// Projector onto the eigenvectors of `h` whose eigenvalue lies within
/// `rel_tol · (λ_max - λ_min)` of `λ_min`.
pub fn min_eigenspace_projector(h: &HermitianOperator, rel_tol: f64) -> Result<Projector> {
    let eig = h.eig()?;
    let vals = &eig.eigenvalues;
    let lo = vals[0];
    let spread = vals[vals.len() - 1] - lo;
    let window = rel_tol * spread;
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&k| vals[k] - lo <= window)
        .collect();
    let gap = vals
        .get(keep.len())
        .map_or(f64::INFINITY, |&next| next - vals[keep.len() - 1]);
    Ok(Projector {
        matrix: eig.projector(&keep),
        rank: keep.len(),
        gap,
    })
}

/// Projectors onto the top eigenspace of the score operator.
pub fn score_projectors(
    state: &CQState,
    channel: &CQChannel,
    beta: f64,
) -> Result<ScoreProjectorFamily> {
    let data = StateData::new(state)?;
    let eval = Evaluation::new(state, &data, channel, beta)?;
    projectors_from(&eval, channel.is_classical())
}

fn projectors_from(eval: &Evaluation, classical: bool) -> Result<ScoreProjectorFamily> {
    let members = eval
        .f0
        .iter()
        .map(|f| {
            let h = if classical {
                HermitianOperator::hermitize(&f.matrix().project_diagonal())
            } else {
                f.clone()
            };
            min_eigenspace_projector(&h, DEGENERACY_REL_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreProjectorFamily { members })
}

fn project(channel: &CQChannel, projectors: &ScoreProjectorFamily) -> Result<CQChannel> {
    let sigmas = channel
        .sigma_t_given_x()
        .iter()
        .zip(&projectors.members)
        .map(|(s, p)| {
            let ps = p.matrix.matmul(s.matrix());
            let overlap = ps.trace().re;
            let mut m = if overlap > OVERLAP_MIN {
                ps.matmul(&p.matrix).scale(1.0 / overlap)
            } else {
                // The current state is orthogonal to the new eigenspace;
                // use the α → 0 limit of the accelerated update at γ = α.
                p.matrix.scale(1.0 / p.rank as f64)
            };
            if channel.is_classical() {
                m = m.project_diagonal();
            }
            if !m.is_finite() {
                return Err(Error::Internal("non-finite projected state".into()));
            }
            Ok(DensityOperator::new_unchecked(
                HermitianOperator::hermitize(&m),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CQChannel::from_parts_unchecked(
        sigmas,
        channel.is_classical(),
    ))
}

/// `σ_{T|x} ↦ P σ_{T|x} P / Tr(σ_{T|x} P)`. When the overlap vanishes the
/// symbol is reassigned to `P / Tr P`, the deterministic limit of the
/// accelerated update; otherwise no symbol could ever leave its eigenspace
/// once it is pure.
pub fn qdib_update(state: &CQState, channel: &CQChannel, beta: f64) -> Result<CQChannel> {
    let projectors = score_projectors(state, channel, beta)?;
    project(channel, &projectors)
}

fn support_size(sigma_t: &DensityOperator) -> Result<usize> {
    Ok(sigma_t
        .eigenvalues()?
        .iter()
        .filter(|&&l| l > SUPPORT_TOL)
        .count())
}

fn row(iter: usize, eval: &Evaluation, beta: f64, residual: f64) -> Result<TraceRow> {
    let s = &eval.summary;
    Ok(TraceRow {
        iter,
        f: s.f_alpha(0.0, beta),
        h_t: s.h_t,
        i_tx: s.i_tx(),
        i_ty: s.i_ty(),
        step_divergence: f64::NAN,
        gamma_ratio: f64::NAN,
        fixed_point_residual: residual,
        support_t: Some(support_size(&eval.sigma_t)?),
    })
}

/// Runs the projector iteration from a seeded random channel. `config.alpha`
/// and `config.gamma` are ignored.
pub fn run_qdib(state: &CQState, config: &ObjectiveConfig) -> Result<(CQChannel, IterationTrace)> {
    config.validate()?;
    let initial = random_channel(config.dim_t, state.size_x(), config.classical, config.seed)?;
    run_qdib_from(state, config, initial)
}

pub fn run_qdib_from(
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
    let beta = config.beta;
    let data = StateData::new(state)?;
    let mut trace = IterationTrace::new(TraceKind::Qdib);
    let mut channel = initial;
    let mut eval = Evaluation::new(state, &data, &channel, beta)?;
    trace.push(row(1, &eval, beta, f64::NAN)?);

    let mut reached_tol = false;
    for iter in 2..=config.max_iters + 1 {
        let projectors = projectors_from(&eval, channel.is_classical())?;
        let next = project(&channel, &projectors)?;
        let next_eval = Evaluation::new(state, &data, &next, beta)?;
        let residual = channel_trace_distance(&next, &channel, state)?;
        let r = row(iter, &next_eval, beta, residual)?;
        let delta = r.f - trace.final_f();
        trace.push(r);
        channel = next;
        eval = next_eval;
        if delta.abs() <= config.tol {
            reached_tol = true;
            break;
        }
    }
    trace.finish(reached_tol);
    debug!(
        "run_qdib: {} after {} rows, f_DIB = {}",
        trace.status.as_str(),
        trace.len(),
        trace.final_f()
    );
    Ok((channel, trace))
}

/// `H(T) - β I(T:Y)`.
pub fn objective_f_dib(state: &CQState, channel: &CQChannel, beta: f64) -> Result<f64> {
    crate::cq::objective_f_alpha(state, channel, 0.0, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qib::f_operator;
    use crate::rng::{dirichlet_ones, random_unitary, seeded_rng};
    use rand::Rng;

    fn random_density(dim: usize, rng: &mut impl Rng) -> DensityOperator {
        let p = dirichlet_ones(dim, rng);
        let u = random_unitary(dim, rng);
        DensityOperator::from_probabilities(&p)
            .unwrap()
            .conjugate(&u)
    }

    fn random_state(seed: u64, size_x: usize, dim_y: usize, classical: bool) -> CQState {
        let mut rng = seeded_rng(seed);
        let px = dirichlet_ones(size_x, &mut rng);
        let rhos = (0..size_x)
            .map(|_| {
                if classical {
                    DensityOperator::from_probabilities(&dirichlet_ones(dim_y, &mut rng)).unwrap()
                } else {
                    random_density(dim_y, &mut rng)
                }
            })
            .collect();
        CQState::new(px, rhos).unwrap()
    }

    fn is_projector(p: &Projector) -> bool {
        let sq = p.matrix.matmul(&p.matrix);
        (&sq - &p.matrix).frobenius_norm() < 1e-9 && p.matrix.hermiticity_residual() < 1e-12
    }

    #[test]
    fn projector_examples() {
        let p = min_eigenspace_projector(
            &HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0]),
            1e-9,
        )
        .unwrap();
        assert_eq!(p.rank, 1);
        assert!((p.matrix[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((p.gap - 1.0).abs() < 1e-15);

        let p = min_eigenspace_projector(
            &HermitianOperator::from_real_diagonal(&[1.0, 1.0, 3.0]),
            1e-9,
        )
        .unwrap();
        assert_eq!(p.rank, 2);
        assert!(is_projector(&p));

        let p = min_eigenspace_projector(&HermitianOperator::identity(4).scale(2.5), 1e-9).unwrap();
        assert_eq!(p.rank, 4);
        assert!((&p.matrix - &ComplexMatrix::identity(4)).frobenius_norm() < 1e-15);
        assert_eq!(p.gap, f64::INFINITY);
    }

    #[test]
    fn score_is_negative_f0() {
        for seed in 0..10 {
            let state = random_state(seed, 3, 2, false);
            let ch = random_channel(3, 3, false, seed).unwrap();
            let score = score_operator(&state, &ch, 4.0).unwrap();
            let f0 = f_operator(&state, &ch, 0.0, 4.0).unwrap();
            for (s, f) in score.members.iter().zip(&f0.members) {
                assert!((s.matrix() + f.matrix()).frobenius_norm() < 1e-9);
            }
        }
    }

    #[test]
    fn score_with_beta_zero_is_log_marginal() {
        let state = random_state(1, 3, 2, false);
        let ch = random_channel(2, 3, false, 1).unwrap();
        let score = score_operator(&state, &ch, 0.0).unwrap();
        let st = crate::cq::sigma_t(&ch, &state).unwrap();
        let log_st = crate::linalg::matrix_log_supported(&st, 1e-12).unwrap();
        for s in &score.members {
            assert!((s.matrix() - log_st.matrix()).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn projectors_are_idempotent() {
        let state = random_state(2, 4, 2, false);
        let ch = random_channel(3, 4, false, 2).unwrap();
        for p in score_projectors(&state, &ch, 5.0).unwrap().members {
            assert!(is_projector(&p));
            assert!(p.rank >= 1);
        }
    }

    #[test]
    fn rank_one_projection_gives_pure_state() {
        let state = random_state(3, 4, 2, false);
        let ch = random_channel(3, 4, false, 3).unwrap();
        let next = qdib_update(&state, &ch, 5.0).unwrap();
        for s in next.sigma_t_given_x() {
            assert!((s.purity() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_channel_on_product_state_is_fixed() {
        let mut rng = seeded_rng(4);
        let r = random_density(2, &mut rng);
        let state = CQState::uniform(vec![r; 3]).unwrap();
        let ch = CQChannel::constant(DensityOperator::maximally_mixed(3), 3, false).unwrap();
        let score = score_operator(&state, &ch, 6.0).unwrap();
        for s in &score.members {
            let expect = ComplexMatrix::identity(3).scale(-(3f64.ln()));
            assert!((s.matrix() - &expect).frobenius_norm() < 1e-10);
        }
        let next = qdib_update(&state, &ch, 6.0).unwrap();
        assert!(channel_trace_distance(&next, &ch, &state).unwrap() < 1e-12);

        let cfg = ObjectiveConfig::new(0.0, 6.0, 3);
        let (_, trace) = run_qdib_from(&state, &cfg, ch).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace.reached_tol);
    }

    #[test]
    fn f_dib_is_monotone() {
        for seed in 0..20 {
            let classical = seed % 2 == 0;
            let state = random_state(100 + seed, 3 + seed as usize % 4, 2, classical);
            for &beta in &[1.0, 5.0, 20.0] {
                let cfg = ObjectiveConfig::new(0.0, beta, 3)
                    .with_seed(seed)
                    .with_classical(classical);
                let (_, trace) = run_qdib(&state, &cfg).unwrap();
                assert!(
                    trace.violations.is_empty(),
                    "seed {seed} beta {beta}: {:?}",
                    trace.deltas()
                );
            }
        }
    }

    #[test]
    fn classical_runs_end_in_point_masses() {
        for seed in 0..10 {
            let state = random_state(200 + seed, 5, 3, true);
            let cfg = ObjectiveConfig::new(0.0, 5.0, 3)
                .with_seed(seed)
                .with_classical(true);
            let (ch, trace) = run_qdib(&state, &cfg).unwrap();
            assert!(trace.reached_tol);
            for s in ch.sigma_t_given_x() {
                let max = s
                    .matrix()
                    .diagonal()
                    .iter()
                    .map(|z| z.re)
                    .fold(0.0, f64::max);
                assert!(max >= 1.0 - 1e-6);
            }
        }
    }
}
