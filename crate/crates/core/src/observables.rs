//! Diagnostics of the noisy junction: Ramsey visibility, Husimi profiles and
//! their theta-function approximation, distances between states, and the
//! direction-optimised quantum Fisher information.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{visibility_closed_form, QuenchSpec};
use crate::error::{domain, Error, Result};
use crate::hilbert::{expectation, husimi_grid, Axis, DensityMatrix, SpinOperator, C64};
use crate::noise::{variance_a2, NoiseModel};

/// Eigenvalue pairs with `p_i + p_j` at or below this are left out of the
/// Fisher sums.
pub const FISHER_EIGEN_FLOOR: f64 = 1e-12;

/// Series terms of [`theta3`] below this magnitude end the summation.
pub const THETA_TERM_CUTOFF: f64 = 1e-15;

/// `ν = (2/N) tr(ρ J_x)`.
pub fn visibility(rho: &DensityMatrix) -> Result<f64> {
    let basis = rho.basis();
    let jx = expectation(rho, &SpinOperator::x(basis))?;
    Ok(2.0 * jx / basis.atoms() as f64)
}

/// `e^{−a²(t)/2} cos(λ̄t) cos^{N−1}(χt)` for a Gaussian noise model.
pub fn visibility_noisy_closed_form(spec: &QuenchSpec, model: &NoiseModel, t: f64) -> Result<f64> {
    if !model.is_gaussian() {
        return Err(Error::Unsupported(
            "closed-form visibility needs Gaussian noise".into(),
        ));
    }
    let a2 = variance_a2(model, t)?;
    Ok((-0.5 * a2).exp() * (model.lambda_bar() * t).cos() * visibility_closed_form(spec, t))
}

/// `½ Σ |eig(a − b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.basis().ensure_same(&b.basis())?;
    Ok(trace_norm_half(&(a.elements() - b.elements())))
}

pub(crate) fn trace_norm_half(m: &DMatrix<C64>) -> f64 {
    0.5 * SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .sum::<f64>()
}

/// Frobenius norm of the off-diagonal (inter-component) part.
pub fn offdiag_weight(rho_od: &DMatrix<C64>) -> f64 {
    rho_od.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `Θ₃(z, q) = 1 + 2 Σ_{k≥1} q^{k²} cos(2kz)`.
pub fn theta3(z: f64, nome: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&nome) {
        return domain(format!("nome must lie in [0, 1), got {nome}"));
    }
    let mut sum = 1.0;
    let mut k = 1u32;
    loop {
        let power = nome.powi((k * k) as i32);
        if power < THETA_TERM_CUTOFF {
            break;
        }
        sum += 2.0 * power * (2.0 * k as f64 * z).cos();
        k += 1;
    }
    Ok(sum)
}

/// Large-`N` Husimi profile of the binomial Fock mixture,
/// `((1 + sin θ)/2)^{N+½} / √(πN sin θ)`.
pub fn husimi_infinity(atoms: usize, theta: f64) -> Result<f64> {
    let s = theta.sin();
    if !(theta > 0.0 && theta < PI) || s <= 0.0 {
        return domain(format!("θ = {theta} must lie strictly inside (0, π)"));
    }
    let n = atoms as f64;
    Ok((((1.0 + s) / 2.0).ln() * (n + 0.5)).exp() / (PI * n * s).sqrt())
}

/// Conditions under which [`husimi_q2_approx`] is not expected to hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxWarning {
    /// `N < 20`.
    FewAtoms,
    /// `a₂ ≲ N^{−1/4}`: the noise has not yet smeared the component width.
    WeakNoise,
}

/// Regime checks for [`husimi_q2_approx`].
pub fn husimi_q2_warnings(atoms: usize, amplitude: f64) -> Vec<ApproxWarning> {
    let mut out = Vec::new();
    if atoms < 20 {
        out.push(ApproxWarning::FewAtoms);
    }
    if amplitude <= (atoms as f64).powf(-0.25) {
        out.push(ApproxWarning::WeakNoise);
    }
    out
}

/// Husimi function of the dephased diagonal part of the two-component cat,
/// `Q_∞(θ) Θ₃(−φ − πλ̄/(2χ), e^{−2a₂²})`, with `a₂ = a(t₂)` the phase spread
/// accumulated at the formation time.
///
/// `Θ₃` uses the nome convention `1 + 2Σ q^{k²} cos 2kz`: the two components
/// sit π apart, so wrapping a Gaussian of variance `a₂²` with period π gives
/// `Θ₃(z, e^{−2a₂²})/π` exactly in this convention.
pub fn husimi_q2_approx(
    atoms: usize,
    amplitude: f64,
    lambda_bar: f64,
    chi: f64,
    theta: f64,
    phi: f64,
) -> Result<f64> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return domain(format!("a₂ must be ≥ 0, got {amplitude}"));
    }
    if !(chi.is_finite() && chi > 0.0) {
        return domain("χ must be positive");
    }
    let q_inf = husimi_infinity(atoms, theta)?;
    let nome = (-2.0 * amplitude * amplitude).exp();
    if nome >= 1.0 {
        // a₂ = 0: the series diverges into the two delta-like peaks
        return domain("a₂ = 0 lies outside the theta-function approximation");
    }
    Ok(q_inf * theta3(-phi - PI * lambda_bar / (2.0 * chi), nome)?)
}

/// Husimi values on a `θ × φ` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiScan {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `values[i][j] = Q(thetas[i], phis[j])`.
    pub values: Vec<Vec<f64>>,
}

impl HusimiScan {
    pub fn compute(rho: &DensityMatrix, thetas: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        let grid = husimi_grid(rho, &thetas, &phis)?;
        let values = (0..thetas.len())
            .map(|i| grid.row(i).iter().copied().collect())
            .collect();
        Ok(Self {
            thetas,
            phis,
            values,
        })
    }

    /// `Q(π/2, φ)` on `points` equally spaced azimuths in `[0, 2π)`.
    pub fn equator(rho: &DensityMatrix, points: usize) -> Result<Self> {
        let phis = (0..points)
            .map(|k| 2.0 * PI * k as f64 / points as f64)
            .collect();
        Self::compute(rho, vec![PI / 2.0], phis)
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Quantum Fisher information of `ρ` for a rotation generated by `u·J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// `F_Q` along `direction`.
    pub value: f64,
    /// Unit generator axis: the requested one, or the optimum.
    pub direction: [f64; 3],
    /// `M_ab` with `F_Q(u) = uᵀ M u`.
    pub form: [[f64; 3]; 3],
}

impl FisherResult {
    /// Optimal `F_Q` over all axes: the largest eigenvalue of `form`.
    pub fn optimum(&self) -> f64 {
        SymmetricEigen::new(Matrix3::from_fn(|i, j| self.form[i][j]))
            .eigenvalues
            .max()
    }
}

/// `F_Q = 2 Σ_{ij} (p_i − p_j)²/(p_i + p_j) |⟨i|u·J|j⟩|²` over the spectral
/// decomposition of `ρ`. With no direction, the 3×3 form is diagonalised and
/// the largest eigenvalue and its eigenvector are returned.
pub fn fisher_information(
    rho: &DensityMatrix,
    direction: Option<[f64; 3]>,
) -> Result<FisherResult> {
    let basis = rho.basis();
    let eig = SymmetricEigen::new(rho.elements().clone());
    let p: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let v = &eig.eigenvectors;
    let v_adj = v.adjoint();
    let gens: Vec<DMatrix<C64>> = [Axis::X, Axis::Y, Axis::Z]
        .into_iter()
        .map(|a| &v_adj * SpinOperator::axis(basis, a).matrix() * v)
        .collect();

    let d = basis.dim();
    let mut form = [[0.0f64; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            let s = p[i] + p[j];
            if s <= FISHER_EIGEN_FLOOR {
                continue;
            }
            let w = 2.0 * (p[i] - p[j]).powi(2) / s;
            if w == 0.0 {
                continue;
            }
            for a in 0..3 {
                for b in a..3 {
                    form[a][b] += w * (gens[a][(i, j)] * gens[b][(j, i)]).re;
                }
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            form[a][b] = form[b][a];
        }
    }

    let m = Matrix3::from_fn(|i, j| form[i][j]);
    let (value, direction) = match direction {
        Some(u) => {
            let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return domain(format!("direction {u:?} is not a unit vector"));
            }
            let uv = Vector3::from(u);
            ((uv.transpose() * m * uv)[(0, 0)], u)
        }
        None => {
            let se = SymmetricEigen::new(m);
            let k = se.eigenvalues.imax();
            let mut axis: Vector3<f64> = se.eigenvectors.column(k).into_owned();
            // fix the sign: largest component positive
            let lead = axis.iamax();
            if axis[lead] < 0.0 {
                axis = -axis;
            }
            (se.eigenvalues[k], [axis[0], axis[1], axis[2]])
        }
    };
    Ok(FisherResult {
        value,
        direction,
        form,
    })
}

/// `Δθ/Δθ_SN = √(N/F_Q)` in decibels.
pub fn sensitivity_gain_db(atoms: usize, fisher: f64) -> f64 {
    10.0 * (atoms as f64 / fisher).sqrt().log10()
}
