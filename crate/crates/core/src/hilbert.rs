//! Fock-basis state space of `N` bosons in two modes.
//!
//! The basis is the spin-`N/2` representation: `|n⟩` with `J_z|n⟩ = n|n⟩`,
//! `n ∈ {-N/2, …, N/2}`, stored at index `i = n + N/2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;

/// Tolerance used for unit-norm and unit-direction checks.
pub const NORM_TOL: f64 = 1e-12;
/// Elementwise Hermiticity and trace tolerance for [`DensityMatrix`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted in a [`DensityMatrix`].
pub const PSD_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated in the expectation of a Hermitian operator.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockBasis {
    atoms: usize,
}

impl FockBasis {
    pub fn new(atoms: usize) -> Result<Self> {
        if atoms == 0 {
            return domain("atom number must be at least 1");
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms + 1
    }

    pub fn half(&self) -> f64 {
        self.atoms as f64 / 2.0
    }

    /// Imbalance `n` stored at `index`.
    pub fn imbalance(&self, index: usize) -> f64 {
        index as f64 - self.half()
    }

    pub fn imbalances(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(move |i| self.imbalance(i))
    }

    /// Index of the Fock state with imbalance `n`.
    pub fn index_of(&self, n: f64) -> Result<usize> {
        let shifted = n + self.half();
        if !n.is_finite() || shifted < -0.0 || shifted > self.atoms as f64 {
            return domain(format!(
                "imbalance {n} outside [-{h}, {h}]",
                h = self.half()
            ));
        }
        if (shifted - shifted.round()).abs() > 1e-12 {
            return domain(format!("n + N/2 = {shifted} is not an integer"));
        }
        Ok(shifted.round() as usize)
    }

    pub fn ensure_same(&self, other: &FockBasis) -> Result<()> {
        if self.atoms != other.atoms {
            return Err(Error::BasisMismatch {
                left: self.atoms,
                right: other.atoms,
            });
        }
        Ok(())
    }
}

/// Exact `ln n! − [(n + ½) ln n − n + ½ ln 2π]` below this argument.
const STIRLING_TABLE: usize = 32;

/// Remainder of Stirling's approximation to `ln n!`.
fn stirling_remainder(n: usize) -> f64 {
    debug_assert!(n > 0);
    let x = n as f64;
    if n < STIRLING_TABLE {
        let ln_fact: f64 = (2..=n).map(|j| (j as f64).ln()).sum();
        return ln_fact - ((x + 0.5) * x.ln() - x + 0.5 * (std::f64::consts::TAU).ln());
    }
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `ln C(N, k)` written as `k ln(N/k) + (N−k) ln(N/(N−k)) + ½ ln(N / 2πk(N−k))`
/// plus Stirling remainders, which avoids subtracting log-factorials of
/// size `N ln N`.
pub fn ln_binomial(atoms: usize, k: usize) -> f64 {
    assert!(k <= atoms, "k = {k} exceeds N = {atoms}");
    if k == 0 || k == atoms {
        return 0.0;
    }
    let (n, kf, rest) = (atoms as f64, k as f64, (atoms - k) as f64);
    kf * (n / kf).ln()
        + rest * (n / rest).ln()
        + 0.5 * (n / (std::f64::consts::TAU * kf * rest)).ln()
        + stirling_remainder(atoms)
        - stirling_remainder(k)
        - stirling_remainder(atoms - k)
}

/// `ln C(N, k)` for `k = 0..=N`.
pub fn ln_binomials(atoms: usize) -> Vec<f64> {
    (0..=atoms).map(|k| ln_binomial(atoms, k)).collect()
}

/// Binomial distribution `P(n) = 2^-N C(N, n + N/2)` over the Fock basis,
/// i.e. the imbalance distribution of the phase state with `α = 1`.
pub fn binomial_weights(atoms: usize) -> Vec<f64> {
    let ln2n = atoms as f64 * std::f64::consts::LN_2;
    ln_binomials(atoms)
        .into_iter()
        .map(|lb| (lb - ln2n).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    basis: FockBasis,
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Wraps an amplitude vector, checking its length and unit norm.
    pub fn new(basis: FockBasis, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return domain(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amplitudes.len()
            ));
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return domain(format!("state norm² = {norm2} is not 1"));
        }
        Ok(Self { basis, amplitudes })
    }

    pub(crate) fn from_parts(basis: FockBasis, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), basis.dim());
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: f64) -> Result<C64> {
        Ok(self.amplitudes[self.basis.index_of(n)?])
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Fock-basis probabilities `|⟨n|ψ⟩|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn density(&self) -> DensityMatrix {
        let elements = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix::from_parts(self.basis, elements)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(overlap(self, other)?.norm_sqr())
    }
}

/// `|n⟩` for imbalance `n`.
pub fn make_fock(atoms: usize, n: f64) -> Result<PureState> {
    let basis = FockBasis::new(atoms)?;
    let idx = basis.index_of(n)?;
    let mut amps = DVector::zeros(basis.dim());
    amps[idx] = C64::new(1.0, 0.0);
    Ok(PureState::from_parts(basis, amps))
}

/// SU(2) coherent state `|θ, φ⟩` with `α = tan(θ/2) e^{-iφ}`.
///
/// The modulus `|α|^k / (1+|α|²)^{N/2}` equals `sin^k(θ/2) cos^{N-k}(θ/2)`,
/// which is evaluated in log space together with `½ ln C(N, k)`. Zero powers
/// of a vanishing sine or cosine are taken as 1, which covers the `θ = 0` and
/// `θ = π` endpoints.
pub fn make_coherent(atoms: usize, theta: f64, phi: f64) -> Result<PureState> {
    let basis = FockBasis::new(atoms)?;
    let theta = polar_angle(theta)?;
    if !phi.is_finite() {
        return domain("φ must be finite");
    }
    Ok(PureState::from_parts(
        basis,
        coherent_amplitudes(atoms, theta, phi, &ln_binomials(atoms)),
    ))
}

/// Accepts `θ ∈ [0, π]`, absorbing rounding overshoot of a few ulp at the poles.
fn polar_angle(theta: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=std::f64::consts::PI + SLACK).contains(&theta) {
        return domain(format!("polar angle needs 0 ≤ θ ≤ π, got θ = {theta}"));
    }
    Ok(theta.clamp(0.0, std::f64::consts::PI))
}

pub(crate) fn coherent_amplitudes(
    atoms: usize,
    theta: f64,
    phi: f64,
    ln_binom: &[f64],
) -> DVector<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let ln_s = s.abs().ln();
    let ln_c = c.abs().ln();
    DVector::from_iterator(
        atoms + 1,
        (0..=atoms).map(|k| {
            let up = k as f64;
            let down = (atoms - k) as f64;
            let mut ln_mod = 0.5 * ln_binom[k];
            if k > 0 {
                ln_mod += up * ln_s;
            }
            if k < atoms {
                ln_mod += down * ln_c;
            }
            let modulus = ln_mod.exp();
            if modulus == 0.0 {
                return C64::new(0.0, 0.0);
            }
            C64::from_polar(modulus, -up * phi)
        }),
    )
}

/// `⟨a|b⟩`.
pub fn overlap(a: &PureState, b: &PureState) -> Result<C64> {
    a.basis.ensure_same(&b.basis)?;
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    basis: FockBasis,
    elements: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity before wrapping.
    pub fn new(basis: FockBasis, elements: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if elements.nrows() != d || elements.ncols() != d {
            return domain(format!(
                "expected a {d}×{d} matrix, got {}×{}",
                elements.nrows(),
                elements.ncols()
            ));
        }
        let herm = hermiticity_defect(&elements);
        if herm > HERMITIAN_TOL {
            return domain(format!("matrix is not Hermitian (defect {herm:e})"));
        }
        let tr = elements.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return domain(format!("trace {tr} is not 1"));
        }
        let min_eig = min_eigenvalue(&elements);
        if min_eig < -PSD_TOL {
            return domain(format!("matrix has negative eigenvalue {min_eig:e}"));
        }
        Ok(Self { basis, elements })
    }

    /// Wraps a matrix that is a density matrix by construction.
    pub(crate) fn from_parts(basis: FockBasis, elements: DMatrix<C64>) -> Self {
        debug_assert_eq!(elements.nrows(), basis.dim());
        Self { basis, elements }
    }

    /// `|n⟩⟨n|`-diagonal matrix with the given weights.
    pub fn diagonal(basis: FockBasis, weights: &[f64]) -> Result<Self> {
        if weights.len() != basis.dim() {
            return domain("weight vector length differs from basis dimension");
        }
        let elements = DMatrix::from_diagonal(&DVector::from_iterator(
            weights.len(),
            weights.iter().map(|&w| C64::new(w, 0.0)),
        ));
        Self::new(basis, elements)
    }

    /// `1/(N+1)` on the diagonal.
    pub fn maximally_mixed(basis: FockBasis) -> Self {
        let w = 1.0 / basis.dim() as f64;
        let elements = DMatrix::from_diagonal_element(basis.dim(), basis.dim(), C64::new(w, 0.0));
        Self::from_parts(basis, elements)
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn into_elements(self) -> DMatrix<C64> {
        self.elements
    }

    /// Fock-basis populations `⟨n|ρ|n⟩`.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.basis.dim())
            .map(|i| self.elements[(i, i)].re)
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.elements.trace()
    }

    /// Spectrum in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.elements.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Largest `|A_ij - conj(A_ji)|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cartesian axis of the collective spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

/// `u·J` on the Fock basis, with `J_x`, `J_y` built from the spin-`N/2`
/// ladder coefficients `√(j(j+1) - m(m+1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperator {
    basis: FockBasis,
    direction: [f64; 3],
    matrix: DMatrix<C64>,
}

impl SpinOperator {
    pub fn along(basis: FockBasis, direction: [f64; 3]) -> Result<Self> {
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return domain(format!("direction {direction:?} has norm {norm}, not 1"));
        }
        Ok(Self {
            basis,
            direction,
            matrix: spin_matrix(basis, direction),
        })
    }

    pub fn axis(basis: FockBasis, axis: Axis) -> Self {
        let direction = axis.unit();
        Self {
            basis,
            direction,
            matrix: spin_matrix(basis, direction),
        }
    }

    pub fn x(basis: FockBasis) -> Self {
        Self::axis(basis, Axis::X)
    }

    pub fn y(basis: FockBasis) -> Self {
        Self::axis(basis, Axis::Y)
    }

    pub fn z(basis: FockBasis) -> Self {
        Self::axis(basis, Axis::Z)
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// Convenience wrapper over [`SpinOperator::along`].
pub fn spin_operator(atoms: usize, direction: [f64; 3]) -> Result<SpinOperator> {
    SpinOperator::along(FockBasis::new(atoms)?, direction)
}

/// `⟨m+1|J_+|m⟩` for the lower index `i` (imbalance `m = i - N/2`).
pub(crate) fn ladder_coefficient(basis: FockBasis, i: usize) -> f64 {
    let j = basis.half();
    let m = basis.imbalance(i);
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

fn spin_matrix(basis: FockBasis, [ux, uy, uz]: [f64; 3]) -> DMatrix<C64> {
    let d = basis.dim();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(uz * basis.imbalance(i), 0.0);
    }
    // J_x = (J+ + J-)/2, J_y = (J+ - J-)/(2i); J+ sits below the diagonal.
    for i in 0..d.saturating_sub(1) {
        let half = 0.5 * ladder_coefficient(basis, i);
        let lower = C64::new(ux * half, -uy * half);
        m[(i + 1, i)] = lower;
        m[(i, i + 1)] = lower.conj();
    }
    m
}

/// `tr(ρ A)` for a Hermitian `A`, rejecting imaginary residues above [`IMAG_TOL`].
pub fn expectation(rho: &DensityMatrix, op: &SpinOperator) -> Result<f64> {
    rho.basis.ensure_same(&op.basis)?;
    let value = trace_product(&rho.elements, &op.matrix);
    if value.im.abs() > IMAG_TOL {
        return Err(Error::Consistency(format!(
            "expectation has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// `tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `⟨ψ|A|ψ⟩` for a pure state.
pub fn pure_expectation(state: &PureState, op: &SpinOperator) -> Result<f64> {
    state.basis.ensure_same(&op.basis)?;
    let v = state.amplitudes.dotc(&(&op.matrix * &state.amplitudes));
    if v.im.abs() > IMAG_TOL {
        return Err(Error::Consistency(format!(
            "expectation has imaginary part {:e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Husimi function `Q(θ, φ) = ⟨θ,φ|ρ|θ,φ⟩`.
pub fn husimi(rho: &DensityMatrix, theta: f64, phi: f64) -> Result<f64> {
    let atoms = rho.basis.atoms();
    let probe = make_coherent(atoms, theta, phi)?;
    Ok(quadratic_form(&rho.elements, probe.amplitudes()))
}

/// Equatorial or general Husimi scan over `thetas × phis`, reusing the
/// log-binomial table across grid points.
pub fn husimi_grid(rho: &DensityMatrix, thetas: &[f64], phis: &[f64]) -> Result<DMatrix<f64>> {
    use rayon::prelude::*;

    let atoms = rho.basis.atoms();
    let thetas = thetas
        .iter()
        .map(|&t| polar_angle(t))
        .collect::<Result<Vec<_>>>()?;
    let ln_binom = ln_binomials(atoms);
    let rows: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|&t| {
            phis.iter()
                .map(|&p| {
                    quadratic_form(&rho.elements, &coherent_amplitudes(atoms, t, p, &ln_binom))
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(thetas.len(), phis.len(), |i, j| {
        rows[i][j]
    }))
}

fn quadratic_form(m: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    v.dotc(&(m * v)).re
}
