//! Noiseless quench evolution under `χJ_z² − λ̄J_z`, q-component phase-state
//! superpositions at `t_q = T/(2q)`, and their mod-q Fock decomposition.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hilbert::{binomial_weights, make_coherent, overlap, FockBasis, PureState, C64};

/// Parameters of the post-quench Hamiltonian `χJ_z² − λ̄J_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    atoms: usize,
    chi: f64,
    lambda_bar: f64,
}

impl QuenchSpec {
    pub fn new(atoms: usize, chi: f64, lambda_bar: f64) -> Result<Self> {
        if atoms == 0 {
            return domain("atom number must be at least 1");
        }
        if !(chi.is_finite() && chi > 0.0) {
            return domain(format!("χ must be positive and finite, got {chi}"));
        }
        if !lambda_bar.is_finite() {
            return domain("λ̄ must be finite");
        }
        Ok(Self {
            atoms,
            chi,
            lambda_bar,
        })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn basis(&self) -> FockBasis {
        FockBasis::new(self.atoms).expect("atoms ≥ 1 checked at construction")
    }

    /// Revival time `T = 2π/χ`.
    pub fn revival_time(&self) -> f64 {
        TAU / self.chi
    }

    /// Same interaction, no deterministic drift.
    pub fn without_drift(&self) -> Self {
        Self {
            lambda_bar: 0.0,
            ..*self
        }
    }
}

/// `e^{-i(χn² − λ̄n)t}|ψ⟩`.
pub fn evolve_noiseless(state: &PureState, spec: &QuenchSpec, t: f64) -> Result<PureState> {
    if !(t.is_finite() && t >= 0.0) {
        return domain(format!("evolution time must be ≥ 0, got {t}"));
    }
    let basis = state.basis();
    basis.ensure_same(&spec.basis())?;
    let chi_t = spec.chi * t;
    let drift_t = spec.lambda_bar * t;
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let n = basis.imbalance(i);
            a * C64::from_polar(1.0, -(chi_t * n * n - drift_t * n))
        })
        .collect::<Vec<_>>();
    Ok(PureState::from_parts(basis, amps.into()))
}

/// Ramsey visibility of the quenched phase state, `cos^{N−1}(χt)`.
pub fn visibility_closed_form(spec: &QuenchSpec, t: f64) -> f64 {
    (spec.chi * t).cos().powi(spec.atoms as i32 - 1)
}

/// A q-component superposition of phase states, formed at `t_q = T/(2q)`
/// from the phase state `α = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatSpec {
    quench: QuenchSpec,
    q: usize,
}

impl CatSpec {
    pub fn new(quench: QuenchSpec, q: usize) -> Result<Self> {
        if q < 2 || !q.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "only even q ≥ 2 superpositions are supported, got q = {q}"
            )));
        }
        if !quench.atoms.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "phase-state superpositions need even N, got N = {}",
                quench.atoms
            )));
        }
        Ok(Self { quench, q })
    }

    pub fn quench(&self) -> &QuenchSpec {
        &self.quench
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn formation_time(&self) -> f64 {
        self.quench.revival_time() / (2.0 * self.q as f64)
    }

    /// `c_k = e^{iπk(k+N)/q}`.
    pub fn coefficient(&self, k: usize) -> C64 {
        let (k, n, q) = (k as f64, self.quench.atoms as f64, self.q as f64);
        C64::from_polar(1.0, PI * k * (k + n) / q)
    }

    /// Azimuth of the k-th component, `2πk/q` shifted by the drift rotation `−λ̄t_q`.
    pub fn component_phase(&self, k: usize) -> f64 {
        TAU * k as f64 / self.q as f64 - self.quench.lambda_bar * self.formation_time()
    }
}

/// The quenched phase state `e^{-iHt_q}|α=1⟩`.
pub fn evolved_phase_state(cat: &CatSpec) -> Result<PureState> {
    let initial = make_coherent(cat.quench.atoms, PI / 2.0, 0.0)?;
    evolve_noiseless(&initial, &cat.quench, cat.formation_time())
}

/// `u₀ Σ_k c_k |π/2, φ_k⟩` with `|u₀|² = 1/q`. The phase of `u₀` is chosen so
/// that the overlap with the directly evolved state is real and positive.
pub fn cat_state(cat: &CatSpec) -> Result<PureState> {
    let atoms = cat.quench.atoms;
    let basis = cat.quench.basis();
    let mut amps = nalgebra::DVector::<C64>::zeros(basis.dim());
    for k in 0..cat.q {
        let component = make_coherent(atoms, PI / 2.0, cat.component_phase(k))?;
        amps += component.amplitudes() * cat.coefficient(k);
    }
    amps /= C64::new((cat.q as f64).sqrt(), 0.0);
    let raw = PureState::from_parts(basis, amps);

    let reference = evolved_phase_state(cat)?;
    let ov = overlap(&raw, &reference)?;
    let phase = if ov.norm() > 0.0 {
        ov / ov.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let amps = raw.amplitudes() * phase;
    Ok(PureState::from_parts(basis, amps))
}

/// Fock matrix of `ρ_kk′ = q⁻¹ c_k c*_k′ |φ_k⟩⟨φ_k′|` in closed form:
/// `q⁻¹ 2^{−N} √(C_n C_n′) e^{−2iπ(kn − k′n′)/q} e^{iπ(k² − k′²)/q}`,
/// times the drift rotation `e^{iλ̄t_q(n − n′)}` when `λ̄ ≠ 0`.
pub fn cat_density_terms(cat: &CatSpec, k: usize, k_prime: usize) -> Result<DMatrix<C64>> {
    if k >= cat.q || k_prime >= cat.q {
        return domain(format!(
            "component indices ({k}, {k_prime}) out of range for q = {}",
            cat.q
        ));
    }
    let basis = cat.quench.basis();
    let sqrt_p: Vec<f64> = binomial_weights(basis.atoms())
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let q = cat.q as f64;
    let (kf, kpf) = (k as f64, k_prime as f64);
    let drift = cat.quench.lambda_bar * cat.formation_time();
    let global = PI * (kf * kf - kpf * kpf) / q;
    Ok(DMatrix::from_fn(basis.dim(), basis.dim(), |i, j| {
        let n = basis.imbalance(i);
        let np = basis.imbalance(j);
        let phase = -TAU * (kf * n - kpf * np) / q + global + drift * (n - np);
        C64::from_polar(sqrt_p[i] * sqrt_p[j] / q, phase)
    }))
}

/// Split of a Fock-basis matrix by `n′ ≡ n (mod q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Entries with `n′ ≡ n (mod q)`: the mixture of phase states.
    pub diagonal: DMatrix<C64>,
    /// The complement: coherences between distinct components.
    pub off_diagonal: DMatrix<C64>,
}

/// Partition `m` into its mod-q diagonal and off-diagonal parts. Every entry
/// lands in exactly one of the two, so their sum reproduces `m` bitwise.
pub fn decompose(m: &DMatrix<C64>, q: usize) -> Result<Decomposition> {
    if q == 0 {
        return domain("q must be positive");
    }
    if m.nrows() != m.ncols() {
        return domain("decompose needs a square matrix");
    }
    let zero = C64::new(0.0, 0.0);
    let keep = |i: usize, j: usize| i.abs_diff(j).is_multiple_of(q);
    let diagonal = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if keep(i, j) {
            m[(i, j)]
        } else {
            zero
        }
    });
    let off_diagonal = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if keep(i, j) {
            zero
        } else {
            m[(i, j)]
        }
    });
    Ok(Decomposition {
        diagonal,
        off_diagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_fock, DensityMatrix};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spec_validation() {
        assert!(QuenchSpec::new(0, 1.0, 0.0).is_err());
        assert!(QuenchSpec::new(4, 0.0, 0.0).is_err());
        assert!(QuenchSpec::new(4, -1.0, 0.0).is_err());
        let odd_n = QuenchSpec::new(5, 1.0, 0.0).unwrap();
        assert!(matches!(CatSpec::new(odd_n, 2), Err(Error::Unsupported(_))));
        let even = QuenchSpec::new(6, 1.0, 0.0).unwrap();
        assert!(matches!(CatSpec::new(even, 3), Err(Error::Unsupported(_))));
        assert!(CatSpec::new(even, 0).is_err());
    }

    #[test]
    fn evolution_identity_and_revival() {
        let spec = QuenchSpec::new(10, 0.8, 0.0).unwrap();
        let psi = make_coherent(10, 1.2, 0.3).unwrap();
        assert_eq!(evolve_noiseless(&psi, &spec, 0.0).unwrap(), psi);
        let back = evolve_noiseless(&psi, &spec, spec.revival_time()).unwrap();
        let max_dev = back
            .amplitudes()
            .iter()
            .zip(psi.amplitudes().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-12, "revival deviation {max_dev}");
        assert!(evolve_noiseless(&psi, &spec, -1.0).is_err());
        let wrong = make_fock(8, 0.0).unwrap();
        assert!(evolve_noiseless(&wrong, &spec, 1.0).is_err());
    }

    #[test]
    fn evolution_is_diagonal() {
        let spec = QuenchSpec::new(30, 1.7, 0.4).unwrap();
        let psi = make_coherent(30, 0.9, 1.0).unwrap();
        let out = evolve_noiseless(&psi, &spec, 2.345).unwrap();
        assert!(close(out.norm_squared(), 1.0, 1e-13));
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes().iter()) {
            assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * b.norm());
        }
    }

    #[test]
    fn closed_form_visibility() {
        let s3 = QuenchSpec::new(3, 1.0, 0.0).unwrap();
        assert_eq!(visibility_closed_form(&s3, 0.0), 1.0);
        assert!(close(visibility_closed_form(&s3, PI / 3.0), 0.25, 1e-15));
        let s10 = QuenchSpec::new(10, 2.0, 0.0).unwrap();
        assert!(visibility_closed_form(&s10, PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn two_cat_matches_direct_evolution() {
        let spec = QuenchSpec::new(10, 1.0, 0.0).unwrap();
        let cat = CatSpec::new(spec, 2).unwrap();
        assert!(close(
            cat.formation_time(),
            spec.revival_time() / 4.0,
            1e-15
        ));
        let psi = cat_state(&cat).unwrap();
        let direct = evolved_phase_state(&cat).unwrap();
        assert!(close(psi.fidelity(&direct).unwrap(), 1.0, 1e-12));
        // Fock populations are the α = 1 binomial
        for (p, b) in psi.probabilities().iter().zip(binomial_weights(10)) {
            assert!(close(*p, b, 1e-12));
        }
        // global phase fixed: overlap is real positive
        let ov = overlap(&psi, &direct).unwrap();
        assert!(ov.im.abs() < 1e-12 && ov.re > 0.0);
    }

    #[test]
    fn four_cat_and_drift() {
        let cat = CatSpec::new(QuenchSpec::new(8, 2.3, 0.0).unwrap(), 4).unwrap();
        let f = cat_state(&cat)
            .unwrap()
            .fidelity(&evolved_phase_state(&cat).unwrap())
            .unwrap();
        assert!(close(f, 1.0, 1e-12));
        let drifting = CatSpec::new(QuenchSpec::new(12, 0.7, 0.45).unwrap(), 4).unwrap();
        let f = cat_state(&drifting)
            .unwrap()
            .fidelity(&evolved_phase_state(&drifting).unwrap())
            .unwrap();
        assert!(close(f, 1.0, 1e-12));
    }

    #[test]
    fn density_terms() {
        let cat = CatSpec::new(QuenchSpec::new(6, 1.0, 0.0).unwrap(), 2).unwrap();
        let mut total = DMatrix::<C64>::zeros(7, 7);
        for k in 0..2 {
            for kp in 0..2 {
                let term = cat_density_terms(&cat, k, kp).unwrap();
                if k == kp {
                    assert!(close(term.trace().re, 0.5, 1e-14));
                } else {
                    // (1/q) c_k c*_k′ ⟨φ_k′|φ_k⟩ vanishes for antipodal phase states
                    let a = make_coherent(6, PI / 2.0, cat.component_phase(k)).unwrap();
                    let b = make_coherent(6, PI / 2.0, cat.component_phase(kp)).unwrap();
                    let expect =
                        cat.coefficient(k) * cat.coefficient(kp).conj() * overlap(&b, &a).unwrap()
                            / 2.0;
                    assert!((term.trace() - expect).norm() < 1e-14);
                }
                total += term;
            }
        }
        let psi = cat_state(&cat).unwrap();
        let outer = psi.density();
        assert!(max_abs(&(total - outer.elements())) < 1e-12);
        assert!(cat_density_terms(&cat, 2, 0).is_err());
    }

    #[test]
    fn density_terms_q4_overlap() {
        // neighbouring components of a q=4 cat overlap by ((1+i)/2)^N·…; nonzero but small
        let cat = CatSpec::new(QuenchSpec::new(8, 1.0, 0.0).unwrap(), 4).unwrap();
        let term = cat_density_terms(&cat, 1, 0).unwrap();
        let a = make_coherent(8, PI / 2.0, cat.component_phase(1)).unwrap();
        let b = make_coherent(8, PI / 2.0, cat.component_phase(0)).unwrap();
        let expect =
            cat.coefficient(1) * cat.coefficient(0).conj() * overlap(&b, &a).unwrap() / 4.0;
        assert!((term.trace() - expect).norm() < 1e-14);
        assert!(expect.norm() > 1e-4);
    }

    #[test]
    fn decomposition_structure() {
        let cat = CatSpec::new(QuenchSpec::new(10, 1.0, 0.0).unwrap(), 2).unwrap();
        let rho = cat_state(&cat).unwrap().density();
        let parts = decompose(rho.elements(), 2).unwrap();
        assert_eq!(&parts.diagonal + &parts.off_diagonal, *rho.elements());
        for i in 0..11 {
            assert_eq!(parts.diagonal[(i, i)], rho.elements()[(i, i)]);
            assert_eq!(parts.off_diagonal[(i, i)], C64::new(0.0, 0.0));
        }
        assert_eq!(parts.off_diagonal.trace(), C64::new(0.0, 0.0));
        for i in 0..10 {
            assert!(parts.off_diagonal[(i, i + 1)].norm() > 1e-3);
        }

        // ρ_d entries equal the initial phase state; ρ_od carries e^{iπ(n′²−n²)/q}
        let initial = make_coherent(10, PI / 2.0, 0.0).unwrap().density();
        let basis = rho.basis();
        for i in 0..11 {
            for j in 0..11 {
                let (n, np) = (basis.imbalance(i), basis.imbalance(j));
                if i.abs_diff(j) % 2 == 0 {
                    assert!((parts.diagonal[(i, j)] - initial.elements()[(i, j)]).norm() < 1e-12);
                } else {
                    let phase = C64::from_polar(1.0, PI * (np * np - n * n) / 2.0);
                    assert!(
                        (parts.off_diagonal[(i, j)] - phase * initial.elements()[(i, j)]).norm()
                            < 1e-12
                    );
                }
            }
        }
        // the noiseless diagonal part is itself a valid state
        assert!(DensityMatrix::new(basis, parts.diagonal).is_ok());
    }
}
