//! Command-line front end: `simulate`, `predict`, `verify`, `kernel`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lambdacoal::asymptotics::{lemma_asymptotics, predict_counts, LemmaClaim, PredictionSet};
use lambdacoal::harness::{emit_string, run_experiment, speed_grid, ExperimentConfig, Format, Statistic};
use lambdacoal::mutation::ReplicateStats;
use lambdacoal::rng::{stream, Purpose};
use lambdacoal::{LevyKernel, Simulator};

#[derive(Parser)]
#[command(name = "lambdacoal", version, about = "Lambda-coalescent simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicates and print per-replicate summaries.
    Simulate(SimulateArgs),
    /// Print the asymptotic constants and predicted curves.
    Predict(PredictArgs),
    /// Run a convergence experiment; exits 0 iff every check passes.
    Verify(VerifyArgs),
    /// Evaluate the Laplace exponent and derived kernel quantities.
    Kernel(KernelArgs),
}

#[derive(Args, Clone, Default)]
struct MeasureArgs {
    /// kingman | beta | uniform | power
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Exponent of the power density.
    #[arg(long)]
    exponent: Option<f64>,
}

impl MeasureArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(m) = &self.measure {
            cfg.measure = m.clone();
        }
        for (dst, src) in [
            (&mut cfg.alpha, self.alpha),
            (&mut cfg.a, self.a),
            (&mut cfg.b, self.b),
            (&mut cfg.mass, self.mass),
            (&mut cfg.eta, self.eta),
            (&mut cfg.exponent, self.exponent),
        ] {
            if src.is_some() {
                *dst = src;
            }
        }
    }

    fn config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("beta");
        cfg.alpha = None;
        self.apply(&mut cfg);
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "json")]
    format: String,
    /// Write the summaries here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first replicate's tree in Newick form.
    #[arg(long)]
    newick: Option<PathBuf>,
    /// Write the first replicate's block-count trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 5)]
    kmax: usize,
    /// Sample sizes at which to evaluate the predicted curves.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 316, 1000, 3162, 10000])]
    n: Vec<usize>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// counts,spectrum,frequencies,mutation_age,speed,unblocked
    #[arg(long, value_delimiter = ',')]
    stats: Option<Vec<String>>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    /// Points at which to evaluate the Laplace exponent.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1000.0])]
    q: Vec<f64>,
    /// Sample size for t_n, the length integral and the speed curve.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value = "csv")]
    format: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Predict(args) => predict(args),
        Command::Verify(args) => verify(args),
        Command::Kernel(args) => kernel(args),
    }
}

fn write_out(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let measure = args.measure.config().build_measure()?;
    let sim = Simulator::new(&measure, args.n)?;
    let rows = (0..args.reps)
        .map(|r| ReplicateStats::simulate(&sim, args.n, args.theta, args.seed, r))
        .collect::<lambdacoal::Result<Vec<_>>>()?;
    if args.newick.is_some() || args.trajectory.is_some() {
        let (tree, traj) = sim.simulate(args.n, &mut stream(args.seed, args.n as u64, 0, Purpose::Tree))?;
        if let Some(path) = &args.newick {
            fs::write(path, tree.to_newick() + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        if let Some(path) = &args.trajectory {
            let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
            traj.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    let text = match args.format.parse::<Format>()? {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut s = String::from("replicate,n,theta,segregating_sites,allele_count,total_length,tmrca,mutation_age\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.replicate, r.n, r.theta, r.segregating_sites, r.allele_count, r.total_length, r.tmrca, r.mutation_age
                );
            }
            s
        }
    };
    write_out(args.out.as_ref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

/// A `quantity,argument,value` line of `predict` and `kernel` output.
#[derive(serde::Serialize)]
struct ValueRow {
    quantity: &'static str,
    argument: Option<f64>,
    value: f64,
}

fn value_row(quantity: &'static str, argument: Option<f64>, value: f64) -> ValueRow {
    ValueRow { quantity, argument, value }
}

fn emit_values(rows: &[ValueRow], format: &str) -> Result<()> {
    let text = match format.parse::<Format>()? {
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        Format::Csv => {
            let mut s = String::from("quantity,argument,value\n");
            for r in rows {
                let arg = r.argument.map(|a| a.to_string()).unwrap_or_default();
                s += &format!("{},{arg},{}\n", r.quantity, r.value);
            }
            s
        }
    };
    write_out(None, &text)
}

fn predict(args: PredictArgs) -> Result<ExitCode> {
    let measure = args.measure.config().build_measure()?;
    let p = PredictionSet::from_measure(&measure, args.theta, args.kmax)?;
    let mut rows = vec![
        value_row("alpha", None, p.alpha),
        value_row("scale", None, p.scale),
        value_row("theta", None, p.theta),
        value_row("B", None, p.b),
        value_row("c", None, p.c),
        value_row("abar", None, p.abar),
        value_row("frequency_constant", None, p.frequency_constant()),
    ];
    for k in 1..=args.kmax {
        rows.push(value_row("c_k", Some(k as f64), p.c(k)));
    }
    for k in 1..=args.kmax {
        rows.push(value_row("cbar_k", Some(k as f64), p.cbar(k)));
    }
    for &n in &args.n {
        let x = n as f64;
        let (s, a) = predict_counts(&p, n as u64);
        rows.push(value_row("segregating_sites", Some(x), s));
        rows.push(value_row("allele_count", Some(x), a));
        for (name, claim) in [("tau_n", LemmaClaim::TauN), ("tree_length", LemmaClaim::TreeLength)] {
            if let Some(v) = lemma_asymptotics(&p, claim).eval(x) {
                rows.push(value_row(name, Some(x), v));
            }
        }
    }
    emit_values(&rows, &args.format)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let mut cfg = args.measure.config();
            cfg.stats = Statistic::ALL.to_vec();
            cfg
        }
    };
    args.measure.apply(&mut cfg);
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.stats {
        cfg.stats = v.iter().map(|s| s.parse()).collect::<lambdacoal::Result<_>>()?;
    }
    if let Some(v) = args.kmax {
        cfg.kmax = v;
    }
    if let Some(v) = args.format {
        cfg.format = v.parse()?;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let report = run_experiment(&cfg)?;
    if cfg.out.is_none() {
        write_out(None, &emit_string(&report, cfg.format)?)?;
    }
    for row in report.failures() {
        eprintln!("FAIL n={} {} mean={} prediction={:?}", row.n, row.statistic, row.mean, row.prediction);
    }
    Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn kernel(args: KernelArgs) -> Result<ExitCode> {
    let measure = args.measure.config().build_measure()?;
    let k = LevyKernel::new(measure)?;
    let mut rows = Vec::new();
    for &q in &args.q {
        rows.push(value_row("psi", Some(q), k.psi(q)?));
    }
    let grey = k.grey_condition()?;
    rows.push(value_row("grey_holds", None, f64::from(u8::from(grey.holds()))));
    if let Some(n) = args.n {
        rows.push(value_row("length_integral", Some(n as f64), k.length_integral(n)?));
        if grey.holds() {
            let curve = k.speed_curve(n, &speed_grid())?;
            rows.push(value_row("t_n", Some(n as f64), curve.t_n));
            for (t, v) in curve.t_grid.iter().zip(&curve.values) {
                rows.push(value_row("v(t_n+t)", Some(*t), *v));
            }
        }
    }
    emit_values(&rows, &args.format)?;
    Ok(ExitCode::SUCCESS)
}
