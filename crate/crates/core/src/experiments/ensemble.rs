//! Random single-qubit ensembles `ρ(θ, λ) = e^{iθσ_x} diag(1-λ, λ) e^{-iθσ_x}`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cq::CQState;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, HermitianOperator};
use crate::rng::stream;

/// `e^{iθσ_x} diag(1-λ, λ) e^{-iθσ_x}`; requires `0 ≤ λ ≤ 1`.
pub fn qubit_density(theta: f64, lambda: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} outside [0, 1]"
        )));
    }
    let (s, c) = theta.sin_cos();
    let i = Complex64::i();
    let u = ComplexMatrix::from_vec(
        2,
        vec![Complex64::from(c), i * s, i * s, Complex64::from(c)],
    )?;
    let d = ComplexMatrix::from_real_diagonal(&[1.0 - lambda, lambda]);
    let m = u.matmul(&d).matmul(&u.adjoint());
    DensityOperator::new(HermitianOperator::hermitize(&m))
}

/// Parameters of a drawn ensemble, kept for audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitEnsembleDraw {
    pub size_x: usize,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub seed: u64,
}

impl QubitEnsembleDraw {
    /// `θ_x ~ U[0, π)`, `λ_x ~ U[0, 1/2)`.
    pub fn draw(size_x: usize, seed: u64) -> Self {
        let mut rng = stream(seed, "qubit-ensemble", 0);
        let mut theta = Vec::with_capacity(size_x);
        let mut lambda = Vec::with_capacity(size_x);
        for _ in 0..size_x {
            theta.push(rng.random_range(0.0..std::f64::consts::PI));
            lambda.push(rng.random_range(0.0..0.5));
        }
        Self {
            size_x,
            theta,
            lambda,
            seed,
        }
    }

    /// Uniform `P_X` over the drawn densities.
    pub fn state(&self) -> Result<CQState> {
        let rhos = self
            .theta
            .iter()
            .zip(&self.lambda)
            .map(|(&t, &l)| qubit_density(t, l))
            .collect::<Result<Vec<_>>>()?;
        CQState::uniform(rhos)
    }
}

pub fn gen_random_qubit_ensemble(size_x: usize, seed: u64) -> Result<CQState> {
    if size_x == 0 {
        return Err(Error::InvalidParameter("sizeX must be positive".into()));
    }
    QubitEnsembleDraw::draw(size_x, seed).state()
}
