//! Hermitian operators, density operators and their spectral calculus.
//!
//! Eigendecompositions come from cyclic complex Jacobi rotations. Every
//! matrix function (logarithm, exponential, square root, projectors) is
//! evaluated as `U f(Λ) U†` on top of that decomposition.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`HermitianOperator::new`].
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted in a density operator.
pub const DENSITY_EIGEN_TOL: f64 = 1e-10;
/// Largest accepted deviation of a density operator's trace from one.
pub const DENSITY_TRACE_TOL: f64 = 1e-9;
/// Eigenvalue floor used by the supported logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 60;
const EXP_MAX_EIGENVALUE: f64 = 700.0;

/// A complex matrix equal to its own conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    /// Accepts `m` if its hermiticity residual is within [`HERMITICITY_TOL`];
    /// the stored matrix is the hermitized copy.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFiniteEntries);
        }
        let r = m.hermiticity_residual();
        if r > HERMITICITY_TOL {
            return Err(Error::NotHermitian(r));
        }
        Ok(Self::hermitize(&m))
    }

    /// `(M + M†) / 2`.
    pub fn hermitize(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            out[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        Self(out)
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `Re Tr(self · other)`; exact for a pair of Hermitian operators.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn eig(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(self)
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(f(λ)) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_eigenvalues(&vals)
    }

    /// `U diag(values) U†` for replacement eigenvalues.
    pub fn with_eigenvalues(&self, values: &[f64]) -> HermitianOperator {
        let u = &self.eigenvectors;
        let n = self.dim();
        let mut weighted = u.clone();
        for i in 0..n {
            for (k, &v) in values.iter().enumerate() {
                weighted[(i, k)] *= v;
            }
        }
        HermitianOperator::hermitize(&weighted.matmul(&u.adjoint()))
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.with_eigenvalues(&self.eigenvalues)
    }

    /// Column `k` of the eigenvector matrix.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    /// Orthogonal projector onto the span of the listed eigenvectors.
    pub fn projector(&self, indices: &[usize]) -> ComplexMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        let mut p = ComplexMatrix::zeros(n);
        for &k in indices {
            for i in 0..n {
                let a = u[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    p[(i, j)] += a * u[(j, k)].conj();
                }
            }
        }
        p
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a Hermitian operator by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below `1e-12`
/// times the Frobenius norm of the input.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let tol = JACOBI_REL_TOL * a.frobenius_norm();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: off,
            });
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let g = 100.0 * mag;
                if sweeps > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                rotate(&mut a, &mut v, p, q, apq, mag, app, aqq);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

// One unitary rotation J chosen so that (J† A J)_pq = 0. With
// a_pq = m·e^{iφ}, J = diag(1, e^{-iφ}) · [[c, s], [-s, c]] on the (p, q) plane.
#[allow(clippy::too_many_arguments)]
fn rotate(
    a: &mut ComplexMatrix,
    v: &mut ComplexMatrix,
    p: usize,
    q: usize,
    apq: Complex64,
    mag: f64,
    app: f64,
    aqq: f64,
) {
    let n = a.dim();
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = apq / mag;
    let phase_conj = phase.conj();

    // A <- A J and V <- V J (columns p, q).
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * phase_conj * s;
        a[(k, q)] = akp * s + akq * phase_conj * c;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * phase_conj * s;
        v[(k, q)] = vkp * s + vkq * phase_conj * c;
    }
    // A <- J† A (rows p, q).
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, p)] = Complex64::new(app - t * mag, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * mag, 0.0);
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
}

/// A positive semidefinite, unit-trace Hermitian operator. The spectral
/// decomposition is computed lazily and cached.
///
/// Densities built by [`exp_normalized`] also remember the exact logarithms
/// of their eigenvalues. Those stay finite when an eigenvalue underflows the
/// log floor, so `ln ρ` of a full-rank exponential is never clipped.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    op: HermitianOperator,
    spectral: OnceLock<SpectralDecomposition>,
    log_spectrum: Option<Vec<f64>>,
}

impl PartialEq for DensityOperator {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
    }
}

impl DensityOperator {
    /// Validates eigenvalues (`≥ -1e-10`) and trace (within `1e-9` of one).
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let spectral = eig_hermitian(&op)?;
        let min = spectral.eigenvalues.first().copied().unwrap_or(0.0);
        if min < -DENSITY_EIGEN_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self::with_spectral(op, spectral))
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Wraps an operator that is a density by construction.
    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self {
            op,
            spectral: OnceLock::new(),
            log_spectrum: None,
        }
    }

    pub(crate) fn with_spectral(op: HermitianOperator, spectral: SpectralDecomposition) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(spectral);
        Self {
            op,
            spectral: cell,
            log_spectrum: None,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new_unchecked(HermitianOperator::identity(dim).scale(1.0 / dim as f64))
    }

    /// `diag(p)`; `p` must be a probability vector.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        check_distribution(p)?;
        Ok(Self::new_unchecked(HermitianOperator::from_real_diagonal(
            p,
        )))
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensity(format!(
                "state norm² {norm} differs from 1"
            )));
        }
        let m = ComplexMatrix::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj());
        Ok(Self::new_unchecked(HermitianOperator::hermitize(&m)))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn spectral(&self) -> Result<&SpectralDecomposition> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = eig_hermitian(&self.op)?;
        let _ = self.spectral.set(s);
        Ok(self.spectral.get().expect("spectral cache just set"))
    }

    /// `ln λ_i` in spectral order: exact for exponentials, otherwise
    /// `ln max(λ_i, floor)`. The flag tells which.
    pub fn log_eigenvalues(&self, floor: f64) -> Result<(Vec<f64>, bool)> {
        if let Some(l) = &self.log_spectrum {
            return Ok((l.clone(), true));
        }
        let logs = self
            .spectral()?
            .eigenvalues
            .iter()
            .map(|&l| l.max(floor).ln())
            .collect();
        Ok((logs, false))
    }

    /// Eigenvalues clamped at zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self
            .spectral()?
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0))
            .collect())
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.op.matrix().max_off_diagonal() <= tol
    }

    pub fn purity(&self) -> f64 {
        self.op.trace_product(&self.op)
    }

    /// `U ρ U†` for a unitary `U`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        let m = u.matmul(self.matrix()).matmul(&u.adjoint());
        Self::new_unchecked(HermitianOperator::hermitize(&m))
    }
}

/// Checks that `p` is a finite, nonnegative vector summing to one within `1e-9`.
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if let Some((i, v)) = p
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DENSITY_TRACE_TOL {
        return Err(Error::InvalidDistribution(format!(
            "sum {s} differs from 1"
        )));
    }
    Ok(())
}

/// `U diag(ln max(λ_i, floor)) U†`; the floor is skipped when `rho` knows its
/// exact log spectrum.
pub fn matrix_log_supported(rho: &DensityOperator, floor: f64) -> Result<HermitianOperator> {
    let (logs, _) = rho.log_eigenvalues(floor)?;
    Ok(rho.spectral()?.with_eigenvalues(&logs))
}

/// `U diag(exp λ_i) U†`. Eigenvalues above 700 are rejected; shift the
/// argument by its largest eigenvalue first when only the normalized
/// exponential is needed (see [`exp_normalized`]).
pub fn matrix_exp(h: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = eig_hermitian(h)?;
    if let Some(&max) = eig.eigenvalues.last() {
        if max > EXP_MAX_EIGENVALUE {
            return Err(Error::ExpOverflow(max));
        }
    }
    Ok(eig.apply(f64::exp))
}

/// `exp(H) / Tr exp(H)` evaluated as `exp(H - λ_max)` followed by
/// normalization. The spectral decomposition of the result is cached.
pub fn exp_normalized(h: &HermitianOperator) -> Result<DensityOperator> {
    if !h.matrix().is_finite() {
        return Err(Error::NonFiniteEntries);
    }
    let eig = eig_hermitian(h)?;
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let log_z = max + z.ln();
    let logs = eig.eigenvalues.iter().map(|&l| l - log_z).collect();
    let op = eig.with_eigenvalues(&probs);
    let spectral = SpectralDecomposition {
        eigenvalues: probs,
        eigenvectors: eig.eigenvectors,
    };
    let mut rho = DensityOperator::with_spectral(op, spectral);
    rho.log_spectrum = Some(logs);
    Ok(rho)
}

/// Principal square root of a density operator.
pub fn sqrt_psd(rho: &DensityOperator) -> Result<HermitianOperator> {
    Ok(rho.spectral()?.apply(|l| l.max(0.0).sqrt()))
}

/// `(M + M†) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> HermitianOperator {
    HermitianOperator::hermitize(m)
}
