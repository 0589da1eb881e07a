//! Closed-form optima for the copy state and the certificates behind them.
//!
//! On `Σ_x (1/d)|x,x⟩⟨x,x|` with `β ≥ 1 ≥ α`, a classical `n`-dimensional
//! memory can reach at best the value of the most balanced partition of `d`
//! symbols into `n` groups, while a quantum memory reaches `(1-β) ln n` with
//! `d` pure states whose average is maximally mixed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cq::{objective_f_alpha, rho_y, sigma_t, von_neumann_entropy, CQChannel, CQState};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, HermitianOperator};

/// Largest number of deterministic maps the brute-force search will visit.
pub const MAX_ENUMERATION: f64 = 1e7;

// Improvement needed to replace the incumbent, so that the lexicographically
// first of several numerically tied maps is reported.
const TIE_TOL: f64 = 1e-12;

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n = {n} must be at least 2"
        )));
    }
    Ok(())
}

/// `(1 - β) ln n`.
pub fn quantum_bound(n: usize, beta: f64) -> Result<f64> {
    check_n(n)?;
    Ok((1.0 - beta) * (n as f64).ln())
}

/// `(1 - β)[l(m+1)/d · ln(d/(m+1)) + (n-l)m/d · ln(d/m)]` with `d = mn + l`.
pub fn classical_bound(d: usize, n: usize, beta: f64) -> Result<f64> {
    check_n(n)?;
    if n >= d {
        return Err(Error::InvalidParameter(format!(
            "n = {n} must be smaller than d = {d}"
        )));
    }
    let (m, l) = (d / n, d % n);
    let df = d as f64;
    let big = (l * (m + 1)) as f64 / df * (df / (m + 1) as f64).ln();
    let small = ((n - l) * m) as f64 / df * (df / m as f64).ln();
    Ok((1.0 - beta) * (big + small))
}

/// `|ψ_{x1}⟩ = n^{-1/2} Σ_{t<n} e^{2πi x1 t / d} |t⟩` for `x1 < d`.
///
/// For `t ≠ s < n < d` the phases `e^{2πi x1 (t-s)/d}` sum to zero over
/// `x1`, so the uniform average of the states is `I/n`; this is checked on
/// construction.
pub fn fourier_feature_channel(d: usize, n: usize) -> Result<CQChannel> {
    check_n(n)?;
    if n >= d {
        return Err(Error::InvalidParameter(format!(
            "n = {n} must be smaller than d = {d}"
        )));
    }
    let amp = 1.0 / (n as f64).sqrt();
    let sigmas = (0..d)
        .map(|x1| {
            let psi: Vec<Complex64> = (0..n)
                .map(|t| Complex64::from_polar(amp, 2.0 * PI * ((x1 * t) % d) as f64 / d as f64))
                .collect();
            DensityOperator::pure(&psi)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut avg = ComplexMatrix::zeros(n);
    for s in &sigmas {
        avg.add_scaled(s.matrix(), 1.0 / d as f64);
    }
    let err = (&avg - &ComplexMatrix::identity(n).scale(1.0 / n as f64)).frobenius_norm();
    if err > 1e-10 {
        return Err(Error::Internal(format!(
            "feature states do not average to I/n (error {err:e})"
        )));
    }
    CQChannel::new(sigmas, false)
}

/// Repeats each symbol's state `k` times, so that a channel on `X1` acts on
/// `X1 × X2` with index `x1·k + x2`.
pub fn lift_channel(channel: &CQChannel, k: usize) -> Result<CQChannel> {
    let sigmas = channel
        .sigma_t_given_x()
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.clone(), k))
        .collect();
    CQChannel::new(sigmas, channel.is_classical())
}

/// Uniform over `X1 × X2` (`|X1| = d`, `|X2| = k`, index `x1·k + x2`) with
/// `ρ_{Y|x1,x2} = |x1⟩⟨x1|`.
pub fn copy_state(d: usize, k: usize) -> Result<CQState> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter("d and k must be positive".into()));
    }
    let rhos = (0..d * k)
        .map(|x| {
            let mut p = vec![0.0; d];
            p[x / k] = 1.0;
            DensityOperator::from_probabilities(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    CQState::uniform(rhos)
}

/// Best deterministic classical map found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub value: f64,
    pub map: Vec<usize>,
}

/// Evaluates `f_α` of deterministic maps through the block structure of
/// `σ_YT = ⊕_t Σ_{g(x)=t} P_X(x) ρ_{Y|x}`: `H(T|X) = 0` and
/// `f = (1-β) H(T) - β H(ρ_Y) + β Σ_t H(block_t)` (unnormalized entropies).
struct MapEvaluator<'a> {
    state: &'a CQState,
    dim_t: usize,
    beta: f64,
    h_y: f64,
    diagonal: Option<Vec<Vec<f64>>>,
}

impl<'a> MapEvaluator<'a> {
    fn new(state: &'a CQState, dim_t: usize, beta: f64) -> Result<Self> {
        let diagonal = state.is_classical_y().then(|| {
            state
                .rho_y_given_x()
                .iter()
                .map(|r| r.matrix().diagonal().iter().map(|z| z.re).collect())
                .collect()
        });
        Ok(Self {
            state,
            dim_t,
            beta,
            h_y: von_neumann_entropy(&rho_y(state))?,
            diagonal,
        })
    }

    fn value(&self, map: &[usize]) -> Result<f64> {
        let mut pt = vec![0.0; self.dim_t];
        for (x, p) in self.state.support() {
            pt[map[x]] += p;
        }
        let h_t: f64 = pt.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        let mut h_blocks = 0.0;
        match &self.diagonal {
            Some(diag) => {
                let dy = self.state.dim_y();
                let mut blocks = vec![0.0; self.dim_t * dy];
                for (x, p) in self.state.support() {
                    let off = map[x] * dy;
                    for (b, &q) in blocks[off..off + dy].iter_mut().zip(&diag[x]) {
                        *b += p * q;
                    }
                }
                h_blocks = blocks
                    .iter()
                    .filter(|&&v| v > 0.0)
                    .map(|&v| -v * v.ln())
                    .sum();
            }
            None => {
                let dy = self.state.dim_y();
                let mut blocks = vec![ComplexMatrix::zeros(dy); self.dim_t];
                for (x, p) in self.state.support() {
                    blocks[map[x]].add_scaled(self.state.rho_y_given_x()[x].matrix(), p);
                }
                for b in blocks.iter().filter(|b| b.trace().re > 0.0) {
                    let eig = HermitianOperator::hermitize(b).eig()?;
                    h_blocks += eig
                        .eigenvalues
                        .iter()
                        .filter(|&&v| v > 0.0)
                        .map(|&v| -v * v.ln())
                        .sum::<f64>();
                }
            }
        }
        Ok((1.0 - self.beta) * h_t - self.beta * self.h_y + self.beta * h_blocks)
    }
}

/// Visits every map whose first symbol goes to `first`, in lexicographic
/// order, keeping the first map that is not beaten by more than `1e-12`.
fn search_prefix(eval: &MapEvaluator, first: usize) -> Result<BruteForceResult> {
    let nx = eval.state.size_x();
    let mut map = vec![0usize; nx];
    map[0] = first;
    let mut best = BruteForceResult {
        value: f64::INFINITY,
        map: map.clone(),
    };
    loop {
        let v = eval.value(&map)?;
        if v < best.value - TIE_TOL {
            best.value = v;
            best.map.copy_from_slice(&map);
        }
        // odometer over positions 1.., last position fastest
        let mut pos = nx;
        loop {
            if pos <= 1 {
                return Ok(best);
            }
            pos -= 1;
            map[pos] += 1;
            if map[pos] < eval.dim_t {
                break;
            }
            map[pos] = 0;
        }
    }
}

/// Minimum of `f_α` over all deterministic maps `g: X → T`, returning the
/// lexicographically first minimizer. For deterministic maps `H(T|X) = 0`,
/// so `α` does not enter.
pub fn brute_force_classical_opt(
    state: &CQState,
    dim_t: usize,
    beta: f64,
) -> Result<BruteForceResult> {
    if dim_t == 0 {
        return Err(Error::InvalidParameter("dimT must be positive".into()));
    }
    let maps = (dim_t as f64).powi(state.size_x() as i32);
    if maps > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge { maps });
    }
    let eval = MapEvaluator::new(state, dim_t, beta)?;
    let parts = (0..dim_t)
        .into_par_iter()
        .map(|first| search_prefix(&eval, first))
        .collect::<Result<Vec<_>>>()?;
    let mut best = parts[0].clone();
    for p in parts.into_iter().skip(1) {
        if p.value < best.value - TIE_TOL {
            best = p;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub quantum: f64,
    pub classical: f64,
    /// `classical - quantum`; positive exactly when `n` does not divide `d`.
    pub gap: f64,
    /// `f_α` of the Fourier feature channel on `copy_state(d, 1)`.
    pub achieved_quantum: f64,
}

/// Gap between the best classical and the achievable quantum value. Cases
/// where `n` divides `d` are accepted and report a zero gap.
pub fn advantage_gap(d: usize, n: usize, alpha: f64, beta: f64) -> Result<AdvantageReport> {
    if !(beta >= 1.0 && (0.0..=1.0).contains(&alpha) && beta >= alpha) {
        return Err(Error::InvalidParameter(format!(
            "need beta >= 1 >= alpha >= 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let quantum = quantum_bound(n, beta)?;
    let classical = classical_bound(d, n, beta)?;
    let state = copy_state(d, 1)?;
    let channel = fourier_feature_channel(d, n)?;
    let achieved_quantum = objective_f_alpha(&state, &channel, alpha, beta)?;
    Ok(AdvantageReport {
        d,
        n,
        alpha,
        beta,
        quantum,
        classical,
        gap: classical - quantum,
        achieved_quantum,
    })
}

/// Entropy of the `T` marginal of a channel (used to certify the feature
/// channel).
pub fn marginal_entropy(channel: &CQChannel, state: &CQState) -> Result<f64> {
    von_neumann_entropy(&sigma_t(channel, state)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::mutual_info_xy;

    #[test]
    #[allow(clippy::approx_constant)] // published six-digit values
    fn quantum_bound_values() {
        assert_eq!(quantum_bound(2, 1.0).unwrap(), 0.0);
        assert!((quantum_bound(2, 2.0).unwrap() + 0.693147).abs() < 1e-6);
        assert!((quantum_bound(2, 10.0).unwrap() + 6.238325).abs() < 1e-6);
        assert!(quantum_bound(1, 2.0).is_err());
    }

    #[test]
    fn classical_bound_values() {
        assert!((classical_bound(4, 2, 2.0).unwrap() + 2f64.ln()).abs() < 1e-15);
        let v = classical_bound(3, 2, 2.0).unwrap();
        let expect = -(2.0 / 3.0 * 1.5f64.ln() + 1.0 / 3.0 * 3f64.ln());
        assert!((v - expect).abs() < 1e-15);
        assert!((v + 0.636514).abs() < 1e-6);
        assert_eq!(classical_bound(3, 2, 1.0).unwrap(), 0.0);
        assert!(classical_bound(3, 3, 2.0).is_err());
    }

    #[test]
    fn fourier_states_for_three_symbols() {
        let ch = fourier_feature_channel(3, 2).unwrap();
        for (x1, s) in ch.sigma_t_given_x().iter().enumerate() {
            assert!((s.purity() - 1.0).abs() < 1e-12);
            let phase = 2.0 * PI * x1 as f64 / 3.0;
            // ⟨0|σ|1⟩ = e^{-iφ}/2
            let off = s.matrix()[(0, 1)];
            assert!((off - Complex64::from_polar(0.5, -phase)).norm() < 1e-12);
        }
        let state = copy_state(3, 1).unwrap();
        assert!((marginal_entropy(&ch, &state).unwrap() - 2f64.ln()).abs() < 1e-10);
        let f = objective_f_alpha(&state, &ch, 1.0, 2.0).unwrap();
        assert!((f + 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn achievability_on_lifted_copy_states() {
        for &(d, n, k) in &[
            (3, 2, 1),
            (3, 2, 2),
            (5, 2, 3),
            (5, 3, 1),
            (7, 4, 2),
            (8, 3, 1),
        ] {
            let state = copy_state(d, k).unwrap();
            let ch = lift_channel(&fourier_feature_channel(d, n).unwrap(), k).unwrap();
            for &beta in &[1.0, 2.0, 10.0] {
                let f = objective_f_alpha(&state, &ch, 1.0, beta).unwrap();
                assert!(
                    (f - quantum_bound(n, beta).unwrap()).abs() < 1e-9,
                    "({d},{n},{k}) β={beta}"
                );
            }
        }
    }

    #[test]
    fn copy_state_properties() {
        let s = copy_state(4, 3).unwrap();
        assert_eq!(s.size_x(), 12);
        assert!((mutual_info_xy(&s).unwrap() - 4f64.ln()).abs() < 1e-12);
        let ry = rho_y(&s);
        assert!((ry.matrix() - &ComplexMatrix::identity(4).scale(0.25)).frobenius_norm() < 1e-15);
        let s1 = copy_state(3, 1).unwrap();
        assert_eq!(s1.rho_y_given_x()[2].matrix()[(2, 2)].re, 1.0);
    }

    #[test]
    fn brute_force_examples() {
        let r = brute_force_classical_opt(&copy_state(3, 1).unwrap(), 2, 2.0).unwrap();
        assert!((r.value + 0.636514).abs() < 1e-6);
        assert_eq!(r.map, vec![0, 0, 1]);

        let r = brute_force_classical_opt(&copy_state(4, 1).unwrap(), 2, 2.0).unwrap();
        assert!((r.value + 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.map, vec![0, 0, 1, 1]);

        // with dimT = |X| the identity map is optimal on the copy state
        let r = brute_force_classical_opt(&copy_state(4, 1).unwrap(), 4, 2.0).unwrap();
        assert!((r.value + 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn brute_force_value_matches_objective() {
        let state = copy_state(3, 2).unwrap();
        let r = brute_force_classical_opt(&state, 2, 3.0).unwrap();
        let ch = CQChannel::deterministic(&r.map, 2).unwrap();
        assert!((objective_f_alpha(&state, &ch, 0.7, 3.0).unwrap() - r.value).abs() < 1e-12);

        // quantum Y takes the eigen path
        let mut rng = crate::rng::seeded_rng(3);
        let rhos = (0..4)
            .map(|_| {
                let p = crate::rng::dirichlet_ones(2, &mut rng);
                let u = crate::rng::random_unitary(2, &mut rng);
                DensityOperator::from_probabilities(&p)
                    .unwrap()
                    .conjugate(&u)
            })
            .collect();
        let qs = CQState::uniform(rhos).unwrap();
        let r = brute_force_classical_opt(&qs, 3, 2.5).unwrap();
        let ch = CQChannel::deterministic(&r.map, 3).unwrap();
        assert!((objective_f_alpha(&qs, &ch, 1.0, 2.5).unwrap() - r.value).abs() < 1e-10);
    }

    #[test]
    fn brute_force_matches_classical_bound() {
        for d in 3..=8 {
            for n in 2..=4.min(d - 1) {
                let state = copy_state(d, 1).unwrap();
                let r = brute_force_classical_opt(&state, n, 2.0).unwrap();
                let b = classical_bound(d, n, 2.0).unwrap();
                assert!((r.value - b).abs() < 1e-9, "({d},{n})");
            }
        }
    }

    #[test]
    fn enumeration_limit() {
        let state = copy_state(24, 1).unwrap();
        assert!(matches!(
            brute_force_classical_opt(&state, 2, 2.0),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn advantage_values() {
        let r = advantage_gap(3, 2, 1.0, 2.0).unwrap();
        assert!((r.gap - (2f64.ln() - 0.636514)).abs() < 1e-6);
        assert!((r.gap - 0.056633).abs() < 1e-6);
        assert!((r.achieved_quantum - r.quantum).abs() < 1e-9);
        assert!(advantage_gap(5, 2, 1.0, 2.0).unwrap().gap > 0.0);
        assert!(advantage_gap(4, 2, 1.0, 2.0).unwrap().gap.abs() < 1e-15);
        assert!(advantage_gap(3, 2, 1.0, 0.5).is_err());
    }
}
