use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use fpto::config::{load_config, RunConfig, OUTPUT_ROOT_ENV};
use fpto::optimizer::two_spring_toy;
use fpto::runner::{run_with, RunStatus};

/// Floating projection topology optimization for minimum compliance.
#[derive(Parser, Debug)]
#[command(name = "fpto", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one optimization from a config file and/or flags.
    Run(RunArgs),
    /// Run several config files, each into its own output directory.
    Batch(BatchArgs),
    /// Print the optimum of the two-spring toy problem for exponent `p`.
    Spring {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// cantilever, mbb or custom
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    nelx: Option<usize>,
    #[arg(long)]
    nely: Option<usize>,
    #[arg(long)]
    volfrac: Option<f64>,
    /// ersatz, hs or simp
    #[arg(long)]
    model: Option<String>,
    /// SIMP exponent
    #[arg(long)]
    penalty: Option<f64>,
    /// smooth, zero_one or continuation
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    move_limit: Option<f64>,
    #[arg(long)]
    beta_start: Option<f64>,
    #[arg(long)]
    beta_step: Option<f64>,
    /// Keep beta at its start value.
    #[arg(long)]
    freeze_beta: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    ngrid: Option<usize>,
    /// Allow a smooth target with a penalized model.
    #[arg(long)]
    allow_penalized_smooth: bool,
    /// Evaluate the smooth design before each beta increment of a 0/1 run.
    #[arg(long)]
    smooth_diagnostic: bool,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_density: bool,
    #[arg(long)]
    no_contours: bool,
    #[arg(long)]
    no_history: bool,
    /// Any other config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        let quote = |s: &str| format!("{s:?}");
        if let Some(v) = &self.problem {
            push("problem", quote(v));
        }
        if let Some(v) = self.nelx {
            push("nelx", v.to_string());
        }
        if let Some(v) = self.nely {
            push("nely", v.to_string());
        }
        if let Some(v) = self.volfrac {
            push("volfrac", float(v));
        }
        if let Some(v) = &self.model {
            push("model", quote(v));
        }
        if let Some(v) = self.penalty {
            push("penalty", float(v));
        }
        if let Some(v) = &self.target {
            push("target", quote(v));
        }
        if let Some(v) = self.r_min {
            push("r_min", float(v));
        }
        if let Some(v) = self.move_limit {
            push("move_limit", float(v));
        }
        if let Some(v) = self.beta_start {
            push("beta_start", float(v));
        }
        if let Some(v) = self.beta_step {
            push("beta_step", float(v));
        }
        if let Some(v) = self.max_iter {
            push("max_iter", v.to_string());
        }
        if let Some(v) = self.ngrid {
            push("ngrid", v.to_string());
        }
        if let Some(v) = &self.output_dir {
            push("output_dir", quote(&v.to_string_lossy()));
        }
        for (flag, key) in [
            (self.freeze_beta, "freeze_beta"),
            (self.allow_penalized_smooth, "allow_penalized_smooth"),
            (self.smooth_diagnostic, "smooth_diagnostic"),
        ] {
            if flag {
                push(key, "true".into());
            }
        }
        for (flag, key) in [
            (self.no_density, "emit_density"),
            (self.no_contours, "emit_contours"),
            (self.no_history, "emit_history"),
        ] {
            if flag {
                push(key, "false".into());
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            push(k.trim(), v.trim().to_string());
        }
        Ok(out)
    }
}

/// TOML float literal (integers need a decimal point).
fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; flags override its keys.
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Suppress per-iteration output.
    #[arg(long, short)]
    quiet: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// Config files to run.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Number of runs executed concurrently.
    #[arg(long, short, default_value_t = 1)]
    jobs: usize,
    /// Parent directory for configs without an `output_dir`
    /// (default: $FPTO_OUTPUT_ROOT, else ./fpto-out).
    #[arg(long)]
    output_root: Option<PathBuf>,
}

fn run_one(cfg: &RunConfig, quiet: bool) -> Result<RunStatus> {
    let report = run_with(cfg, |line| {
        if !quiet {
            println!("{line}");
        }
    })
    .context("run failed")?;
    print!("{}", report.summary);
    println!("output_dir: {}", report.output_dir.display());
    Ok(report.summary.status)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref(), &args.overrides.pairs()?)?;
    if args.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(ExitCode::SUCCESS);
    }
    let status = run_one(&cfg, args.quiet)?;
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn batch_config(path: &Path, root: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = load_config(Some(path), &[])?;
    if cfg.output_dir.is_none() {
        let base = root
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fpto-out"));
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        cfg.output_dir = Some(base.join(stem));
    }
    Ok(cfg)
}

fn cmd_batch(args: BatchArgs) -> Result<ExitCode> {
    let configs = args
        .configs
        .iter()
        .map(|p| batch_config(p, args.output_root.as_deref()).with_context(|| format!("{}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut dirs: Vec<&Path> = configs.iter().filter_map(|c| c.output_dir.as_deref()).collect();
    dirs.sort();
    if dirs.windows(2).any(|w| w[0] == w[1]) {
        anyhow::bail!("two batch entries write to the same output directory");
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<RunStatus>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = configs.get(i) else { break };
                let r = run_with(cfg, |_| {}).map(|rep| rep.summary.status).map_err(anyhow::Error::from);
                results.lock().unwrap().push((i, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let mut code = 0u8;
    for (i, r) in &results {
        let name = args.configs[*i].display();
        match r {
            Ok(st) => {
                println!("{name}: {}", if *st == RunStatus::Converged { "converged" } else { "not converged" });
                code = code.max(st.exit_code() as u8);
            }
            Err(e) => {
                println!("{name}: error: {e:#}");
                code = 1;
            }
        }
    }
    // any error outranks non-convergence
    if results.iter().any(|(_, r)| r.is_err()) {
        code = 1;
    }
    Ok(ExitCode::from(code))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Spring { p } => {
            let opt = two_spring_toy(p);
            println!("p: {p}\nx1: {}\nobjective: {}\nlocal_minima: {:?}", opt.x1, opt.objective, opt.local_minima);
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
