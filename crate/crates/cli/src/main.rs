use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::Parser;
use qme_cli::config::normalize_key;
use qme_cli::{execute, CliError, RunConfig, Settings};

/// Simulate dissipative quantum dynamics and write trajectory.csv, run_meta
/// and plot.gp.
///
/// Settings are resolved from defaults, then the --config file, then the
/// flags given here, then (in sweep mode) each line of the sweep file.
#[derive(Debug, Parser)]
#[command(name = "qme", version)]
struct Cli {
    /// two_level_relax | oscillator_quench | mu_table | bloch_jacobian
    #[arg(long)]
    experiment: Option<String>,
    /// thermodynamic | linearized | caldeira_leggett | lindblad_bloch
    #[arg(long)]
    equation: Option<String>,
    /// Initial oscillator temperature in units of ħω [1.5]
    #[arg(long = "kT0", alias = "kt0")]
    kt0: Option<String>,
    /// Bath temperature in units of ħω [0.5]
    #[arg(long = "kTe", alias = "kte")]
    kte: Option<String>,
    /// Oscillator friction ζ/mω [0.1]
    #[arg(long)]
    zeta_over_m_omega: Option<String>,
    /// Two-level emission rate [0.1]
    #[arg(long)]
    gamma0: Option<String>,
    /// Angular frequency [1]
    #[arg(long)]
    omega: Option<String>,
    /// Oscillator basis size N+1 [10]
    #[arg(long)]
    n_states: Option<String>,
    /// Time step [2π·10⁻³/ω]
    #[arg(long)]
    dt: Option<String>,
    /// Final time [100/ω]
    #[arg(long)]
    t_end: Option<String>,
    /// Record every this many steps [10]
    #[arg(long)]
    record_stride: Option<String>,
    /// direct | eigensystem [direct]
    #[arg(long)]
    method: Option<String>,
    /// Initial Bloch vector `x,y,z`, `canonical` (at kT0) or `random` (from the seed)
    #[arg(long, allow_hyphen_values = true)]
    m0: Option<String>,
    /// Weight of the Q₃ coupling of the two-level system [0]
    #[arg(long)]
    q3_weight: Option<String>,
    /// Number of points of the μ table [1000]
    #[arg(long)]
    points: Option<String>,
    /// Largest |m| of the μ table [0.999]
    #[arg(long)]
    m_max: Option<String>,
    /// Seed for random initial states [0]
    #[arg(long)]
    seed: Option<String>,
    /// Output directory [qme_out]
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// File with one run per line as whitespace-separated `key=value`
    /// overrides; run k writes to <output-dir>/run_k
    #[arg(long)]
    sweep: Option<PathBuf>,
}

impl Cli {
    fn flag_settings(&self) -> Result<Settings, CliError> {
        let output_dir = self.output_dir.as_ref().map(|p| p.display().to_string());
        let flags = [
            ("experiment", &self.experiment),
            ("equation", &self.equation),
            ("kt0", &self.kt0),
            ("kte", &self.kte),
            ("zeta-over-m-omega", &self.zeta_over_m_omega),
            ("gamma0", &self.gamma0),
            ("omega", &self.omega),
            ("n-states", &self.n_states),
            ("dt", &self.dt),
            ("t-end", &self.t_end),
            ("record-stride", &self.record_stride),
            ("method", &self.method),
            ("m0", &self.m0),
            ("q3-weight", &self.q3_weight),
            ("points", &self.points),
            ("m-max", &self.m_max),
            ("seed", &self.seed),
            ("output-dir", &output_dir),
        ];
        let mut s = Settings::new();
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v).map_err(CliError::Config)?;
            }
        }
        Ok(s)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// One resolved configuration per sweep line, each in its own
/// subdirectory of the base output directory.
fn sweep_configs(base: &Settings, path: &Path) -> Result<Vec<RunConfig>, CliError> {
    let text = read(path)?;
    let root = PathBuf::from(base.get("output-dir").unwrap_or("qme_out"));
    let mut configs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let over = Settings::parse_inline(line, &format!("{}:{}", path.display(), n + 1))?;
        if over.get(&normalize_key("output-dir")).is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: output-dir cannot be set per run",
                path.display(),
                n + 1
            )));
        }
        let mut s = base.clone();
        s.overlay(&over);
        let dir = root.join(format!("run_{:03}", configs.len()));
        s.set("output-dir", &dir.display().to_string())
            .map_err(CliError::Config)?;
        configs.push(RunConfig::from_settings(&s)?);
    }
    if configs.is_empty() {
        return Err(CliError::Config(format!(
            "{} contains no runs",
            path.display()
        )));
    }
    Ok(configs)
}

/// Runs on a pool of worker threads; results come back in input order.
fn run_concurrently(configs: &[RunConfig]) -> Vec<Result<usize, CliError>> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<usize, CliError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(k) else { break };
                let r = execute(config).map(|out| out.table.rows());
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[k] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every run was claimed"))
        .collect()
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let mut settings = match &cli.config {
        Some(path) => Settings::parse(&read(path)?, &path.display().to_string())?,
        None => Settings::new(),
    };
    settings.overlay(&cli.flag_settings()?);

    let Some(sweep) = &cli.sweep else {
        let config = RunConfig::from_settings(&settings)?;
        let out = execute(&config)?;
        println!(
            "{}: {} rows written to {}",
            config.experiment,
            out.table.rows(),
            config.output_dir.display()
        );
        return Ok(());
    };

    let configs = sweep_configs(&settings, sweep)?;
    let results = run_concurrently(&configs);
    let mut worst: Option<CliError> = None;
    for (config, result) in configs.iter().zip(results) {
        match result {
            Ok(rows) => println!("{}: {rows} rows", config.output_dir.display()),
            Err(e) => {
                eprintln!("qme: {}: {e}", config.output_dir.display());
                if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
