//! Property tests over randomly drawn states, channels and parameters.

use proptest::prelude::*;
use rand::Rng;

use qib_core::cq::{
    channel_divergence, mutual_info_tx, mutual_info_ty, objective_f_alpha, relative_entropy,
    CQState,
};
use qib_core::linalg::{
    eig_hermitian, exp_normalized, matrix_log_supported, ComplexMatrix, HermitianOperator,
    LOG_FLOOR,
};
use qib_core::qib::{f_operator, gamma_ratio, random_channel, update};
use qib_core::rng::{dirichlet_ones, random_unitary, stream};

fn random_hermitian(dim: usize, scale: f64, seed: u64) -> HermitianOperator {
    let mut rng = stream(seed, "prop-hermitian", 0);
    let m = ComplexMatrix::from_fn(dim, |_, _| {
        num_complex::Complex64::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    });
    HermitianOperator::hermitize(&m)
}

fn random_state(size_x: usize, dim_y: usize, seed: u64) -> CQState {
    let mut rng = stream(seed, "prop-state", 0);
    let px = dirichlet_ones(size_x, &mut rng);
    let rhos = random_channel(dim_y, size_x, false, rng.random())
        .unwrap()
        .sigma_t_given_x()
        .to_vec();
    CQState::new(px, rhos).unwrap()
}

fn is_density(m: &ComplexMatrix, tol: f64) -> bool {
    let h = HermitianOperator::hermitize(m);
    let eig = eig_hermitian(&h).unwrap();
    (m.trace().re - 1.0).abs() < tol && m.hermiticity_residual() < tol && eig.eigenvalues[0] > -tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_reconstructs(dim in 1usize..=6, seed in any::<u64>()) {
        let h = random_hermitian(dim, 3.0, seed);
        let eig = eig_hermitian(&h).unwrap();
        let back = eig.reconstruct();
        prop_assert!((back.matrix() - h.matrix()).frobenius_norm() < 1e-10);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn exp_normalized_log_is_shifted_exponent(dim in 1usize..=5, scale in 0.1f64..80.0, seed in any::<u64>()) {
        let h = random_hermitian(dim, scale, seed);
        let rho = exp_normalized(&h).unwrap();
        prop_assert!(is_density(rho.matrix(), 1e-10));
        // ln ρ = h - c·I for a scalar c, even when eigenvalues fall below the floor.
        let diff = matrix_log_supported(&rho, LOG_FLOOR).unwrap().matrix() - h.matrix();
        let c = diff.trace().re / dim as f64;
        let residual = &diff - &ComplexMatrix::identity(dim).scale(c);
        prop_assert!(residual.frobenius_norm() < 1e-8 * (1.0 + scale));
    }

    #[test]
    fn relative_entropy_is_nonnegative_and_unitarily_invariant(dim in 1usize..=4, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-divergence", 0);
        let a = random_channel(dim, 2, false, rng.random()).unwrap();
        let (rho, sigma) = (&a.sigma_t_given_x()[0], &a.sigma_t_given_x()[1]);
        let d = relative_entropy(rho, sigma).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(relative_entropy(rho, rho).unwrap() < 1e-10);
        let u = random_unitary(dim, &mut rng);
        let d_rot = relative_entropy(&rho.conjugate(&u), &sigma.conjugate(&u)).unwrap();
        prop_assert!((d - d_rot).abs() < 1e-8 * (1.0 + d));
    }

    #[test]
    fn information_obeys_data_processing(
        size_x in 2usize..=5,
        dim_y in 1usize..=3,
        dim_t in 1usize..=3,
        classical in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let state = random_state(size_x, dim_y, seed);
        let channel = random_channel(dim_t, size_x, classical, seed ^ 1).unwrap();
        let i_tx = mutual_info_tx(&state, &channel).unwrap();
        let i_ty = mutual_info_ty(&state, &channel).unwrap();
        prop_assert!(i_tx >= -1e-12);
        prop_assert!(i_ty >= -1e-12);
        prop_assert!(i_ty <= i_tx + 1e-10);
        prop_assert!(i_tx <= (dim_t as f64).ln() + 1e-10);
    }

    #[test]
    fn update_yields_valid_channels(
        size_x in 2usize..=5,
        dim_t in 1usize..=3,
        alpha in 0.0f64..2.0,
        gamma_scale in 0.2f64..2.0,
        beta in 0.0f64..20.0,
        classical in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let state = random_state(size_x, 2, seed);
        let channel = random_channel(dim_t, size_x, classical, seed ^ 2).unwrap();
        let gamma = (alpha * gamma_scale).max(0.05);
        let next = update(&state, &channel, gamma, alpha, beta).unwrap();
        prop_assert_eq!(next.is_classical(), classical);
        for s in next.sigma_t_given_x() {
            prop_assert!(is_density(s.matrix(), 1e-9));
            if classical {
                prop_assert!(s.is_diagonal(1e-12));
            }
        }
    }

    #[test]
    fn safe_update_does_not_increase_objective(
        size_x in 2usize..=5,
        dim_t in 2usize..=3,
        alpha in 0.1f64..2.0,
        beta in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let state = random_state(size_x, 2, seed);
        let channel = random_channel(dim_t, size_x, false, seed ^ 3).unwrap();
        let next = update(&state, &channel, alpha, alpha, beta).unwrap();
        let before = objective_f_alpha(&state, &channel, alpha, beta).unwrap();
        let after = objective_f_alpha(&state, &next, alpha, beta).unwrap();
        prop_assert!(after <= before + 1e-9, "{before} -> {after}");
    }

    #[test]
    fn gamma_ratio_never_exceeds_alpha(
        size_x in 2usize..=5,
        dim_t in 1usize..=3,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let state = random_state(size_x, 2, seed);
        let a = random_channel(dim_t, size_x, false, seed ^ 4).unwrap();
        let b = random_channel(dim_t, size_x, false, seed ^ 5).unwrap();
        prop_assume!(channel_divergence(&a, &b, &state).unwrap() > 1e-9);
        let r = gamma_ratio(&state, &a, &b, alpha, beta).unwrap();
        prop_assert!(r <= alpha + 1e-9, "ratio {r} > alpha {alpha}");
    }

    #[test]
    fn objective_is_expectation_of_f_operator(
        size_x in 2usize..=4,
        dim_t in 1usize..=3,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let state = random_state(size_x, 2, seed);
        let channel = random_channel(dim_t, size_x, false, seed ^ 6).unwrap();
        let f = objective_f_alpha(&state, &channel, alpha, beta).unwrap();
        let family = f_operator(&state, &channel, alpha, beta).unwrap();
        prop_assert!((f - family.expectation(&state, &channel)).abs() < 1e-9);
    }
}
