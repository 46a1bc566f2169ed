//! Checks that tie the kernel numerics, the asymptotic constants, the
//! simulator and the command-line front end together.

use std::process::Command;

use lambdacoal::asymptotics::{lemma_asymptotics, AsymptoticCurve, LemmaClaim, PredictionSet};
use lambdacoal::harness::{load_report, run_experiment, ExperimentConfig, Format, Statistic};
use lambdacoal::rng::{stream, Purpose};
use lambdacoal::{LambdaMeasure, LevyKernel, Simulator};

/// `∫_lo^hi u v(u) du` by composite Simpson in `ln u`.
fn weighted_speed_integral(k: &LevyKernel, lo: f64, hi: f64, panels: usize) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / panels as f64;
    let f = |y: f64| {
        let u = y.exp();
        u * u * k.speed_v(u).unwrap()
    };
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn window(curve: AsymptoticCurve, lo: f64, hi: f64) -> f64 {
    curve.eval(lo).unwrap() - curve.eval(hi).unwrap()
}

#[test]
fn weighted_length_constant_matches_speed_integral() {
    // power regime: the increment over a window near zero fixes the constant
    for alpha in [1.25, 1.4] {
        let m = LambdaMeasure::beta_alpha(alpha).unwrap();
        let p = PredictionSet::from_measure(&m, 1.0, 1).unwrap();
        let k = LevyKernel::new(m).unwrap();
        let curve = lemma_asymptotics(&p, LemmaClaim::WeightedLength);
        let (lo, hi) = (1e-9, 1e-7);
        let numeric = weighted_speed_integral(&k, lo, hi, 200);
        let ratio = numeric / window(curve, lo, hi);
        assert!((ratio - 1.0).abs() < 1e-2, "alpha={alpha}: ratio {ratio}");
    }
    // log regime at α = 3/2
    let m = LambdaMeasure::beta_alpha(1.5).unwrap();
    let p = PredictionSet::from_measure(&m, 1.0, 1).unwrap();
    let k = LevyKernel::new(m).unwrap();
    let curve = lemma_asymptotics(&p, LemmaClaim::WeightedLength);
    assert!(matches!(curve, AsymptoticCurve::Log { .. }));
    let numeric = weighted_speed_integral(&k, 1e-9, 1e-7, 200);
    let ratio = numeric / window(curve, 1e-9, 1e-7);
    assert!((ratio - 1.0).abs() < 1e-2, "log regime ratio {ratio}");
    // no deterministic limit once ᾱ < 1
    let p = PredictionSet::new(1.75, 1.0, 1.0, 1).unwrap();
    assert_eq!(lemma_asymptotics(&p, LemmaClaim::WeightedLength), AsymptoticCurve::RandomLimit);
}

#[test]
fn simulated_tree_length_follows_lemma_curve() {
    let alpha = 1.5;
    let n = 10_000;
    let m = LambdaMeasure::beta_alpha(alpha).unwrap();
    let p = PredictionSet::from_measure(&m, 1.0, 1).unwrap();
    let sim = Simulator::new(&m, n).unwrap();
    let reps = 200;
    let (mut length, mut tau) = (0.0, 0.0);
    for r in 0..reps {
        let (tree, _) = sim.simulate(n, &mut stream(21, n as u64, r, Purpose::Tree)).unwrap();
        length += tree.total_length() / reps as f64;
        tau += tree.tmrca() / reps as f64;
    }
    let predicted = lemma_asymptotics(&p, LemmaClaim::TreeLength).eval(n as f64).unwrap();
    assert!((length / predicted - 1.0).abs() < 0.1, "length {length} vs {predicted}");
    // the root is reached in finite time and the first merger comes fast
    let tau_n = lemma_asymptotics(&p, LemmaClaim::TauN).eval(n as f64).unwrap();
    assert!(tau > 100.0 * tau_n);
}

#[test]
fn kernel_and_simulator_agree_on_total_rates() {
    // the first event at b lineages is exponential with the kernel's total rate
    let m = LambdaMeasure::beta_alpha(1.3).unwrap();
    let b = 50;
    let sim = Simulator::new(&m, b).unwrap();
    let total = m.rate_table(b as u64).unwrap().total;
    let reps = 20_000;
    let mut first = 0.0;
    for r in 0..reps {
        let (_, traj) = sim.simulate(b, &mut stream(22, b as u64, r, Purpose::Tree)).unwrap();
        first += traj.jump_times[0] / reps as f64;
    }
    let se = 1.0 / total / (reps as f64).sqrt();
    assert!((first - 1.0 / total).abs() < 4.0 * se, "mean {first} vs {}", 1.0 / total);
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Csv, Format::Json] {
        let path = dir.path().join(format!("report.{format:?}"));
        let cfg = ExperimentConfig {
            n: vec![30, 60],
            reps: 20,
            stats: vec![Statistic::Counts, Statistic::Spectrum],
            out: Some(path.clone()),
            format,
            ..ExperimentConfig::beta_alpha(1.5)
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(load_report(&path, format).unwrap(), report);
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lambdacoal"))
}

#[test]
fn cli_verify_exit_status_reflects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    // an exact identity that must hold: no mutations at a single leaf
    let status = cli()
        .args(["verify", "--measure", "beta", "--alpha", "1.5", "--n", "1", "--reps", "3", "--stats", "counts", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(load_report(&out, Format::Csv).unwrap().all_pass());
    // an asymptotic check at tiny n with a zero tolerance must fail
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "measure = \"beta\"\nalpha = 1.5\nn = [20]\nreps = 50\nstats = [\"counts\"]\n\n[tolerances]\ncounts = 0.0\n",
    )
    .unwrap();
    let failed = cli().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(failed.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("FAIL"));
    let bad = cli().args(["verify", "--measure", "beta", "--alpha", "2.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn cli_kernel_and_simulate_outputs() {
    let out = cli().args(["kernel", "--measure", "kingman", "--q", "2,4", "--n", "10"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,argument,value\npsi,2,2\npsi,4,8\ngrey_holds,,1\n"), "{text}");
    assert!(text.contains("t_n,10,0.2\n"));
    let out = cli().args(["predict", "--measure", "beta", "--alpha", "1.5", "--format", "json"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c1 = v.as_array().unwrap().iter().find(|r| r["quantity"] == "c_k" && r["argument"] == 1.0).unwrap();
    assert_eq!(c1["value"].as_f64().unwrap(), 0.5);

    let dir = tempfile::tempdir().unwrap();
    let nwk = dir.path().join("t.nwk");
    let out = cli()
        .args(["simulate", "--measure", "uniform", "--n", "12", "--reps", "3", "--seed", "4", "--newick"])
        .arg(&nwk)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    let tree = std::fs::read_to_string(&nwk).unwrap();
    assert!(tree.trim_end().ends_with(';'));
    for leaf in 1..=12 {
        assert!(tree.contains(&format!("{leaf}:")));
    }
}
