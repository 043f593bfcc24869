use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bjj_core::dynamics::{cat_state, decompose, visibility_closed_form, CatSpec, QuenchSpec};
use bjj_core::hilbert::{husimi, make_coherent, DensityMatrix, C64};
use bjj_core::noise::{
    markov_matched_amplitude, mc_density_matrix, noisy_density_matrix, sample_trajectories,
    steady_state, variance_a2,
};
use bjj_core::observables::{
    fisher_information, husimi_infinity, husimi_q2_approx, offdiag_weight, sensitivity_gain_db,
    trace_distance, visibility, visibility_noisy_closed_form,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::output::{write_atomic, Table};

/// Points in each equatorial Husimi scan.
pub const HUSIMI_POINTS: usize = 360;
/// Largest allowed `|nu_matrix − nu_noisy|`.
pub const VISIBILITY_TOL: f64 = 1e-10;
/// Relative flatness required of the strongly filtered Husimi scan.
pub const FLATNESS_TOL: f64 = 0.01;
/// Filter amplitude from which a scan is expected to be flat.
pub const FLAT_AMPLITUDE: f64 = 2.9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub gates: Vec<Gate>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Visibility of the quenched phase state: noiseless, noisy closed form and
/// the full density-matrix pipeline, for every `chi` on the time grid.
pub fn visibility_cmd(cfg: &RunConfig) -> Result<Report> {
    let model = cfg.noise.model(cfg.lambda_bar)?;
    let psi = make_coherent(cfg.atoms, FRAC_PI_2, 0.0)?;
    let times = cfg.time.values();
    let mut table = Table::new(&["chi", "t", "nu_noiseless", "nu_noisy", "nu_matrix"]);
    let mut worst = 0.0f64;
    for &chi in &cfg.chi {
        let spec = QuenchSpec::new(cfg.atoms, chi, cfg.lambda_bar)?;
        let rows = times
            .par_iter()
            .map(|&t| -> bjj_core::Result<[f64; 3]> {
                let rho = noisy_density_matrix(&psi, &spec, &model, t)?;
                Ok([
                    visibility_closed_form(&spec, t),
                    visibility_noisy_closed_form(&spec, &model, t)?,
                    visibility(&rho)?,
                ])
            })
            .collect::<bjj_core::Result<Vec<_>>>()?;
        for (&t, [nu0, noisy, matrix]) in times.iter().zip(rows) {
            worst = worst.max((matrix - noisy).abs());
            table.push(vec![
                chi.into(),
                t.into(),
                nu0.into(),
                noisy.into(),
                matrix.into(),
            ]);
        }
    }
    table.write(&cfg.output.path, cfg.output.format)?;
    Ok(Report {
        outputs: vec![cfg.output.path.clone()],
        gates: vec![Gate::new(
            "matrix-matches-closed-form",
            worst < VISIBILITY_TOL,
            format!("max |nu_matrix - nu_noisy| = {worst:.3e}"),
        )],
    })
}

fn cat_density(cfg: &RunConfig, q: usize) -> Result<(CatSpec, DensityMatrix)> {
    let spec = QuenchSpec::new(cfg.atoms, cfg.chi[0], cfg.lambda_bar)?;
    let cat = CatSpec::new(spec, q)?;
    let rho = cat_state(&cat)?.density();
    Ok((cat, rho))
}

fn matrix_table(m: &DMatrix<C64>, half: f64) -> Table {
    let mut t = Table::new(&["n", "n_prime", "re", "im", "abs"]);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            t.push(vec![
                (i as f64 - half).into(),
                (j as f64 - half).into(),
                z.re.into(),
                z.im.into(),
                z.norm().into(),
            ]);
        }
    }
    t
}

struct Relaxed {
    q: usize,
    amplitude: f64,
    formation_time: f64,
    distance: f64,
    weight: f64,
    fisher: f64,
    scan_full: Vec<f64>,
    scan_d: Vec<f64>,
}

/// Diagonal and off-diagonal parts of the filtered cats, equatorial Husimi
/// scans and a summary table, for `q` and for `2q` at Markov-matched amplitudes.
pub fn cat_relaxation_cmd(cfg: &RunConfig) -> Result<Report> {
    let dir = &cfg.output.path;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let ext = cfg.output.format.extension();
    let steady = steady_state(cfg.atoms)?;
    let q_steady = husimi(&steady, FRAC_PI_2, 0.0)?;
    let phis: Vec<f64> = (0..HUSIMI_POINTS)
        .map(|k| 2.0 * PI * k as f64 / HUSIMI_POINTS as f64)
        .collect();
    let mut report = Report::default();
    let mut results = Vec::new();

    for (q, matched) in [(cfg.q, false), (2 * cfg.q, true)] {
        let (cat, rho) = cat_density(cfg, q)?;
        let half = rho.basis().half();
        for &a2 in &cfg.amplitudes {
            let amplitude = if matched {
                markov_matched_amplitude(a2, cfg.q, q)
            } else {
                a2
            };
            let filtered = rho.gaussian_dephased(amplitude * amplitude)?;
            let parts = decompose(filtered.elements(), q)?;
            let rho_d = DensityMatrix::new(rho.basis(), parts.diagonal.clone())?;
            let tag = format!("q{q}_a{amplitude:.4}");
            for (name, m) in [("rho_d", &parts.diagonal), ("rho_od", &parts.off_diagonal)] {
                let path = dir.join(format!("{name}_{tag}.{ext}"));
                matrix_table(m, half).write(&path, cfg.output.format)?;
                report.outputs.push(path);
            }

            let scan_full: Vec<f64> = phis
                .par_iter()
                .map(|&phi| husimi(&filtered, FRAC_PI_2, phi))
                .collect::<bjj_core::Result<_>>()?;
            let scan_d: Vec<f64> = phis
                .par_iter()
                .map(|&phi| husimi(&rho_d, FRAC_PI_2, phi))
                .collect::<bjj_core::Result<_>>()?;
            let mut scan = Table::new(&["phi", "q_full", "q_d", "q_theta3"]);
            for (k, &phi) in phis.iter().enumerate() {
                let approx = if q == 2 {
                    husimi_q2_approx(
                        cfg.atoms,
                        amplitude,
                        cfg.lambda_bar,
                        cfg.chi[0],
                        FRAC_PI_2,
                        phi,
                    )
                    .ok()
                } else {
                    None
                };
                scan.push(vec![
                    phi.into(),
                    scan_full[k].into(),
                    scan_d[k].into(),
                    approx.into(),
                ]);
            }
            let path = dir.join(format!("husimi_{tag}.{ext}"));
            scan.write(&path, cfg.output.format)?;
            report.outputs.push(path);

            results.push(Relaxed {
                q,
                amplitude,
                formation_time: cat.formation_time(),
                distance: trace_distance(&rho_d, &steady)?,
                weight: offdiag_weight(&parts.off_diagonal),
                fisher: fisher_information(&filtered, None)?.value,
                scan_full,
                scan_d,
            });

            if !matched && q == 2 && amplitude == 0.0 {
                report.gates.push(peak_gate(&cat, &filtered)?);
            }
        }
    }

    let mut summary = Table::new(&[
        "q",
        "amplitude",
        "formation_time",
        "trace_distance_to_steady",
        "offdiag_weight",
        "fisher",
        "husimi_full_min",
        "husimi_full_max",
        "husimi_d_min",
        "husimi_d_max",
    ]);
    for r in &results {
        let (fmin, fmax) = min_max(&r.scan_full);
        let (dmin, dmax) = min_max(&r.scan_d);
        summary.push(vec![
            r.q.into(),
            r.amplitude.into(),
            r.formation_time.into(),
            r.distance.into(),
            r.weight.into(),
            r.fisher.into(),
            fmin.into(),
            fmax.into(),
            dmin.into(),
            dmax.into(),
        ]);
        if r.q == cfg.q && r.amplitude >= FLAT_AMPLITUDE {
            let mean = r.scan_d.iter().sum::<f64>() / r.scan_d.len() as f64;
            let flatness = (dmax - dmin) / mean;
            let offset = (mean / q_steady - 1.0).abs();
            report.gates.push(Gate::new(
                format!("flat-husimi-a{:.4}", r.amplitude),
                flatness < FLATNESS_TOL && offset < FLATNESS_TOL,
                format!(
                    "spread {flatness:.2e}, mean/Q_steady - 1 = {offset:.2e}, asymptotic Q_inf = {:.6}",
                    husimi_infinity(cfg.atoms, FRAC_PI_2)?
                ),
            ));
        }
    }
    let n = cfg.amplitudes.len();
    for (primary, companion) in results[..n].iter().zip(&results[n..]) {
        if primary.amplitude > 0.0 {
            report.gates.push(Gate::new(
                format!("companion-relaxes-first-a{:.4}", primary.amplitude),
                companion.distance < primary.distance,
                format!(
                    "q={} at {:.4}: {:.4e}; q={} at {:.4}: {:.4e}",
                    primary.q,
                    primary.amplitude,
                    primary.distance,
                    companion.q,
                    companion.amplitude,
                    companion.distance
                ),
            ));
        }
    }
    let path = dir.join(format!("summary.{ext}"));
    summary.write(&path, cfg.output.format)?;
    report.outputs.push(path);
    Ok(report)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// The unfiltered two-component cat peaks at its component phases.
fn peak_gate(cat: &CatSpec, rho: &DensityMatrix) -> Result<Gate> {
    let q = |phi: f64| husimi(rho, FRAC_PI_2, phi);
    let mut global = 0.0f64;
    for k in 0..4 * HUSIMI_POINTS {
        global = global.max(q(2.0 * PI * k as f64 / (4 * HUSIMI_POINTS) as f64)?);
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 0..cat.q() {
        let phi = cat.component_phase(k).rem_euclid(2.0 * PI);
        let peak = q(phi)?;
        let local = peak > q(phi - 1e-3)? && peak > q(phi + 1e-3)?;
        ok &= local && peak >= global - 1e-12;
        detail.push(format!("Q({phi:.4}) = {peak:.6}"));
    }
    Ok(Gate::new(
        "peaks-at-component-phases",
        ok,
        format!("{}; grid max {global:.6}", detail.join(", ")),
    ))
}

/// Optimal quantum Fisher information of the filtered cat against the
/// filter amplitude.
pub fn fisher_scan_cmd(cfg: &RunConfig) -> Result<Report> {
    let (_, rho) = cat_density(cfg, cfg.q)?;
    let n = cfg.atoms as f64;
    let results = cfg
        .amplitudes
        .par_iter()
        .map(|&a| -> bjj_core::Result<_> {
            fisher_information(&rho.gaussian_dephased(a * a)?, None)
        })
        .collect::<bjj_core::Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        "amplitude",
        "fisher",
        "direction_x",
        "direction_y",
        "direction_z",
        "gain_db",
        "delta_theta_single_shot",
    ]);
    let mut in_range = true;
    for (&a, f) in cfg.amplitudes.iter().zip(&results) {
        in_range &= f.value >= 0.0 && f.value <= n * n * (1.0 + 1e-9);
        table.push(vec![
            a.into(),
            f.value.into(),
            f.direction[0].into(),
            f.direction[1].into(),
            f.direction[2].into(),
            sensitivity_gain_db(cfg.atoms, f.value).into(),
            (1.0 / f.value.sqrt()).into(),
        ]);
    }
    table.write(&cfg.output.path, cfg.output.format)?;
    Ok(Report {
        outputs: vec![cfg.output.path.clone()],
        gates: vec![Gate::new(
            "fisher-within-bounds",
            in_range,
            format!("0 ≤ F_Q ≤ N² = {}", n * n),
        )],
    })
}

#[derive(Debug, Serialize)]
struct McPoint {
    t: f64,
    a2: f64,
    deviation: f64,
}

#[derive(Debug, Serialize)]
struct McReport {
    command: &'static str,
    atoms: usize,
    chi: f64,
    lambda_bar: f64,
    trajectories: usize,
    dt: f64,
    seed: u64,
    bound: f64,
    max_deviation: f64,
    passed: bool,
    points: Vec<McPoint>,
}

/// Monte-Carlo density matrices from sampled noise trajectories against the
/// analytic Gaussian filter.
pub fn mc_validate_cmd(cfg: &RunConfig) -> Result<Report> {
    let model = cfg.noise.model(cfg.lambda_bar)?;
    let spec = QuenchSpec::new(cfg.atoms, cfg.chi[0], cfg.lambda_bar)?;
    let psi = make_coherent(cfg.atoms, FRAC_PI_2, 0.0)?;
    let times = cfg.time.values();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let steps = (t_max / cfg.mc.dt).round();
    let ensemble = sample_trajectories(
        &model,
        steps * cfg.mc.dt,
        cfg.mc.dt,
        cfg.mc.trajectories,
        cfg.mc.seed,
    )?;
    let mut points = Vec::new();
    for &t in &times {
        let index = ensemble.time_index(t)?;
        let t_grid = ensemble.time(index);
        let mc = mc_density_matrix(&psi, &spec, &ensemble, t_grid)?;
        let exact = noisy_density_matrix(&psi, &spec, &model, t_grid)?;
        let deviation = (mc.elements() - exact.elements())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        points.push(McPoint {
            t: t_grid,
            a2: variance_a2(&model, t_grid)?,
            deviation,
        });
    }
    let bound = 5.0 / (cfg.mc.trajectories as f64).sqrt();
    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let passed = max_deviation < bound;
    let report = McReport {
        command: "mc-validate",
        atoms: cfg.atoms,
        chi: cfg.chi[0],
        lambda_bar: cfg.lambda_bar,
        trajectories: cfg.mc.trajectories,
        dt: cfg.mc.dt,
        seed: cfg.mc.seed,
        bound,
        max_deviation,
        passed,
        points,
    };
    let bytes = match cfg.output.format {
        Format::Csv => toml::to_string(&report)?.into_bytes(),
        Format::JsonLines => {
            let mut v = serde_json::to_vec(&report)?;
            v.push(b'\n');
            v
        }
    };
    write_atomic(&cfg.output.path, &bytes)?;
    if !max_deviation.is_finite() {
        bail!("Monte-Carlo deviation is not finite");
    }
    Ok(Report {
        outputs: vec![cfg.output.path.clone()],
        gates: vec![Gate::new(
            "mc-within-statistical-bound",
            passed,
            format!("max |Δρ| = {max_deviation:.4e}, bound 5/√M = {bound:.4e}"),
        )],
    })
}
