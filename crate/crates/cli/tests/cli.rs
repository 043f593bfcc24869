use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bjj_cli::config::{NoiseConfig, TimeGrid};
use bjj_cli::{CommandName, RunConfig};

fn bjj(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bjj"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &RunConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, config.to_toml().unwrap()).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn float(s: &str) -> f64 {
    s.parse().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn defaults_subcommand_prints_a_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bjj(dir.path(), &["defaults", "visibility"]);
    assert!(out.status.success());
    let config = RunConfig::from_toml(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(config, RunConfig::defaults(CommandName::Visibility));
    assert_eq!(config.atoms, 400);
    assert_eq!(config.chi, vec![PI * 0.05, PI * 0.13, PI * 0.25]);
}

#[test]
fn visibility_file_and_noise_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::defaults(CommandName::Visibility);
    // 0 and the half-decay time of the noise factor, e^{−h0 t²/2} = 1/2
    let t_half = (2.0 * 2f64.ln() / 64.0).sqrt();
    config.time = TimeGrid {
        start: 0.0,
        stop: t_half,
        points: 2,
    };
    let cfg = write_config(dir.path(), "vis.toml", &config);
    let out = bjj(
        dir.path(),
        &[
            "visibility",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "v.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let (header, rows) = read_csv(&dir.path().join("v.csv"));
    assert_eq!(
        header,
        ["chi", "t", "nu_noiseless", "nu_noisy", "nu_matrix"]
    );
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let v: Vec<f64> = row.iter().map(|s| float(s)).collect();
        assert!((v[4] - v[3]).abs() < 1e-10);
        if v[1] == 0.0 {
            for nu in &v[2..] {
                assert!((nu - 1.0).abs() < 1e-12);
            }
        } else {
            let noise = 0.5f64;
            let twisting = v[2];
            assert!((v[3] - noise * twisting).abs() < 1e-12);
            if (v[0] - PI * 0.05).abs() < 1e-15 {
                // weak twisting: most of the decay comes from the noise factor
                assert!(noise.ln() < 5.0 * twisting.ln(), "{twisting}");
            }
            if (v[0] - PI * 0.25).abs() < 1e-15 {
                assert!(twisting < noise);
            }
        }
    }
    // every float written with 17 significant digits
    assert!(rows[1][2].contains('e') && rows[1][2].split('e').next().unwrap().len() == 18);
}

#[test]
fn cat_relaxation_writes_matrices_scans_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bjj(dir.path(), &["cat-relaxation", "--out", "cats"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    for gate in [
        "peaks-at-component-phases",
        "flat-husimi-a2.9000",
        "companion-relaxes-first-a0.9000",
    ] {
        assert!(err.contains(gate), "{err}");
    }
    let cats = dir.path().join("cats");
    for a in ["0.0000", "0.9000", "2.9000"] {
        for part in ["rho_d", "rho_od", "husimi"] {
            assert!(
                cats.join(format!("{part}_q2_a{a}.csv")).exists(),
                "{part} {a}"
            );
        }
    }
    for a in ["0.6364", "2.0506"] {
        assert!(cats.join(format!("rho_d_q4_a{a}.csv")).exists());
    }

    let (header, rows) = read_csv(&cats.join("rho_d_q2_a0.9000.csv"));
    assert_eq!(header, ["n", "n_prime", "re", "im", "abs"]);
    assert_eq!(rows.len(), 121);
    let trace: f64 = rows
        .iter()
        .filter(|r| r[0] == r[1])
        .map(|r| float(&r[2]))
        .sum();
    assert!((trace - 1.0).abs() < 1e-12);

    let (_, scan) = read_csv(&cats.join("husimi_q2_a0.0000.csv"));
    assert_eq!(scan.len(), 360);
    assert!(scan.iter().all(|r| r[3].is_empty()));
    let (_, scan) = read_csv(&cats.join("husimi_q2_a2.9000.csv"));
    assert!(scan.iter().all(|r| !r[3].is_empty()));

    let (header, summary) = read_csv(&cats.join("summary.csv"));
    assert_eq!(header[3], "trace_distance_to_steady");
    let ratio = float(&summary[1][1]) / float(&summary[4][1]);
    assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
    assert!((float(&summary[4][1]) - 0.64).abs() <= 0.01);
    assert!((float(&summary[5][1]) - 2.05).abs() <= 0.01);
}

#[test]
fn cat_relaxation_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = bjj(
        dir.path(),
        &["cat-relaxation", "--out", "cats", "--format", "json-lines"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("cats/summary.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["q"], 2);
    assert!((rows[0]["fisher"].as_f64().unwrap() - 100.0).abs() < 1e-8);
    let scan = std::fs::read_to_string(dir.path().join("cats/husimi_q2_a0.0000.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(scan.lines().next().unwrap()).unwrap();
    assert!(first["q_theta3"].is_null());
}

#[test]
fn fisher_scan_reference_points() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::defaults(CommandName::FisherScan);
    config.amplitudes = vec![0.0, 0.9, 10.0];
    let cfg = write_config(dir.path(), "f.toml", &config);
    let out = bjj(
        dir.path(),
        &[
            "fisher-scan",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "f.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&dir.path().join("f.csv"));
    assert_eq!(header[1], "fisher");
    assert_eq!(header[5], "gain_db");
    let f: Vec<f64> = rows.iter().map(|r| float(&r[1])).collect();
    let gain: Vec<f64> = rows.iter().map(|r| float(&r[5])).collect();
    assert!((f[0] - 100.0).abs() < 1e-8);
    assert!((gain[0] + 5.0).abs() < 1e-9);
    assert!((gain[1] + 3.8).abs() <= 0.1);
    assert!(f[2] < 10.0);
    assert!((f[2] - 45.0 / 11.0).abs() < 1e-8);
}

#[test]
fn mc_validate_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::defaults(CommandName::McValidate);
    config.mc.trajectories = 3000;
    let cfg = write_config(dir.path(), "mc.toml", &config);
    let c = cfg.to_str().unwrap();
    let runs = [
        bjj(
            dir.path(),
            &["mc-validate", "--config", c, "--out", "a.toml"],
        ),
        bjj(
            dir.path(),
            &[
                "mc-validate",
                "--config",
                c,
                "--out",
                "b.toml",
                "--threads",
                "1",
            ],
        ),
        bjj(
            dir.path(),
            &[
                "mc-validate",
                "--config",
                c,
                "--out",
                "c.toml",
                "--threads",
                "3",
            ],
        ),
        bjj(
            dir.path(),
            &[
                "mc-validate",
                "--config",
                c,
                "--out",
                "d.toml",
                "--seed",
                "7",
            ],
        ),
    ];
    for run in &runs {
        assert!(run.status.success(), "{}", stderr(run));
    }
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    assert_eq!(read("a.toml"), read("b.toml"));
    assert_eq!(read("a.toml"), read("c.toml"));
    assert_ne!(read("a.toml"), read("d.toml"));

    let report: toml::Table = toml::from_str(&read("a.toml")).unwrap();
    assert_eq!(report["passed"].as_bool(), Some(true));
    assert_eq!(report["points"].as_array().unwrap().len(), 6);
    assert!(report["max_deviation"].as_float().unwrap() < 0.02);
}

#[test]
fn mc_validate_degenerate_noise_has_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::defaults(CommandName::McValidate);
    config.noise = NoiseConfig::Static { h0: 0.0 };
    config.mc.trajectories = 10;
    let cfg = write_config(dir.path(), "mc.toml", &config);
    let out = bjj(
        dir.path(),
        &[
            "mc-validate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r.jsonl",
            "--format",
            "json-lines",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap())
            .unwrap();
    assert_eq!(report["max_deviation"].as_f64(), Some(0.0));
}

#[test]
fn mc_validate_rejects_off_grid_times() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::defaults(CommandName::McValidate);
    config.mc.trajectories = 10;
    config.time = TimeGrid {
        start: 0.0,
        stop: 0.5 * config.mc.dt * 7.0,
        points: 3,
    };
    let cfg = write_config(dir.path(), "mc.toml", &config);
    let out = bjj(
        dir.path(),
        &["mc-validate", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("not on the ensemble grid"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "vis.toml",
        &RunConfig::defaults(CommandName::Visibility),
    );
    let out = bjj(
        dir.path(),
        &["fisher-scan", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not `fisher-scan`"));

    std::fs::write(
        dir.path().join("bad.toml"),
        "command = \"fisher-scan\"\natoms = 0\n",
    )
    .unwrap();
    let out = bjj(dir.path(), &["fisher-scan", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = bjj(dir.path(), &["fisher-scan", "--out", "missing/dir/f.csv"]);
    assert_eq!(out.status.code(), Some(2));
}
