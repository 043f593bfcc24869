//! Cross-module invariants, checked through the public API.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::dynamics::{
    cat_state, decompose, evolve_noiseless, visibility_closed_form, CatSpec, QuenchSpec,
};
use crate::hilbert::{
    binomial_weights, make_coherent, pure_expectation, DensityMatrix, FockBasis, SpinOperator, C64,
};
use crate::noise::{apply_dephasing, apply_gaussian_dephasing, steady_state, NoiseModel};
use crate::observables::{fisher_information, trace_distance};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cat(atoms: usize, q: usize) -> DensityMatrix {
    let spec = QuenchSpec::new(atoms, 1.0, 0.0).unwrap();
    cat_state(&CatSpec::new(spec, q).unwrap())
        .unwrap()
        .density()
}

fn random_hermitian(seed: u64, dim: usize) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &g + g.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coherent_states_are_normalised(atoms in 1usize..2000, theta in 0.0..PI, phi in -PI..PI) {
        let psi = make_coherent(atoms, theta, phi).unwrap();
        prop_assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_is_an_exact_partition(seed in any::<u64>(), dim in 1usize..40, q in 1usize..6) {
        let m = random_hermitian(seed, dim);
        let parts = decompose(&m, 2 * q).unwrap();
        prop_assert_eq!(&parts.diagonal + &parts.off_diagonal, m);
    }

    #[test]
    fn decompose_commutes_with_dephasing(
        seed in any::<u64>(),
        dim in 1usize..30,
        q in 1usize..5,
        lambda_bar in -2.0..2.0f64,
        h0 in 0.0..4.0f64,
        t in 0.0..3.0f64,
    ) {
        let m = random_hermitian(seed, dim);
        let model = NoiseModel::ornstein_uhlenbeck(lambda_bar, h0, 0.5).unwrap();
        let a = decompose(&apply_dephasing(&m, &model, t).unwrap(), 2 * q).unwrap();
        let parts = decompose(&m, 2 * q).unwrap();
        prop_assert_eq!(a.diagonal, apply_dephasing(&parts.diagonal, &model, t).unwrap());
        prop_assert_eq!(a.off_diagonal, apply_dephasing(&parts.off_diagonal, &model, t).unwrap());
    }

    #[test]
    fn cat_populations_are_binomial(half in 2usize..30, q in prop::sample::select(vec![2usize, 4, 8])) {
        let atoms = 2 * half;
        let populations = cat(atoms, q).populations();
        for (p, w) in populations.iter().zip(binomial_weights(atoms)) {
            prop_assert!((p - w).abs() < 1e-12);
        }
    }
}

#[test]
fn expectation_of_jx_tracks_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for atoms in [2usize, 3, 10, 57, 100, 250, 400] {
        let psi = make_coherent(atoms, FRAC_PI_2, 0.0).unwrap();
        let jx = SpinOperator::x(FockBasis::new(atoms).unwrap());
        for _ in 0..50 {
            let spec = QuenchSpec::new(atoms, rng.random_range(0.01..3.0), 0.0).unwrap();
            let t = rng.random_range(0.0..10.0);
            let state = evolve_noiseless(&psi, &spec, t).unwrap();
            let nu = 2.0 / atoms as f64 * pure_expectation(&state, &jx).unwrap();
            assert!(
                (nu - visibility_closed_form(&spec, t)).abs() < 1e-10,
                "N={atoms} t={t}"
            );
        }
    }
}

#[test]
fn fisher_is_nonincreasing_under_the_filter() {
    let rho = cat(10, 2);
    let values: Vec<f64> = (0..=10)
        .map(|k| {
            let a = 0.3 * k as f64;
            fisher_information(&rho.gaussian_dephased(a * a).unwrap(), None)
                .unwrap()
                .value
        })
        .collect();
    assert!((values[0] - 100.0).abs() < 1e-8);
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{values:?}");
    assert!(values
        .iter()
        .all(|&f| (0.0..=100.0 * (1.0 + 1e-9)).contains(&f)));
}

/// Finite-difference Bures fidelity under e^{-iθJ} as an oracle for the SLD formula.
fn bures_fisher(rho: &DensityMatrix, generator: &DMatrix<C64>) -> f64 {
    let dth = 1e-3;
    let eig = generator.clone().symmetric_eigen();
    let rotate = eig.eigenvalues.map(|l| C64::new(0.0, -l * dth).exp());
    let u = &eig.eigenvectors * DMatrix::from_diagonal(&rotate) * eig.eigenvectors.adjoint();
    let moved = &u * rho.elements() * u.adjoint();
    let sqrt = |m: &DMatrix<C64>| {
        let e = m.clone().symmetric_eigen();
        let roots = e.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
        &e.eigenvectors * DMatrix::from_diagonal(&roots) * e.eigenvectors.adjoint()
    };
    let s = sqrt(rho.elements());
    let fidelity: f64 = (&s * moved * &s)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    8.0 * (1.0 - fidelity) / (dth * dth)
}

#[test]
fn fisher_matches_bures_fidelity_for_mixed_states() {
    let rho = cat(10, 2);
    for a in [0.3, 0.9, 1.5] {
        let filtered = rho.gaussian_dephased(a * a).unwrap();
        let result = fisher_information(&filtered, None).unwrap();
        let op = SpinOperator::along(filtered.basis(), result.direction).unwrap();
        let oracle = bures_fisher(&filtered, op.matrix());
        assert!(
            (result.value - oracle).abs() < 1e-3 * oracle,
            "a={a}: {} vs {oracle}",
            result.value
        );
    }
}

#[test]
fn strong_noise_reaches_the_steady_state() {
    for (atoms, q) in [(10usize, 2usize), (10, 4), (20, 2), (40, 8)] {
        let steady = steady_state(atoms).unwrap();
        for a2 in [50.0, 80.0] {
            let m = apply_gaussian_dephasing(cat(atoms, q).elements(), a2).unwrap();
            let rho = DensityMatrix::new(FockBasis::new(atoms).unwrap(), m).unwrap();
            assert!(trace_distance(&rho, &steady).unwrap() < 1e-9);
        }
    }
}
