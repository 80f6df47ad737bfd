//! `csdelay`: command-line driver for the delayed stochastic flocking experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use csdelay::analysis::{
    calibrate_threshold, classify_delayed_ode, critical_delay, default_delta, dgbm_bound,
    fundamental_solution, gbm_bias_study, l2_criterion, lyapunov_params, path_indicator,
    INDICATOR_WINDOW,
};
use csdelay::config::Config;
use csdelay::engine::{simulate_path, snap_to_grid, SeedMaterial};
use csdelay::output::{
    manifest_toml, write_fundamental_csv, write_gbm_bias_csv, write_sweep_csv,
    write_trajectory_csv, RunManifest,
};
use csdelay::sweep::{run_sweep, WORKERS_ENV};
use csdelay::Error;

#[derive(Debug, Parser)]
#[command(
    name = "csdelay",
    version,
    about = "Delayed stochastic Cucker-Smale flocking experiments"
)]
struct Cli {
    /// TOML configuration; a run manifest is accepted as well.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed of all noise streams (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sufficient flocking conditions for given parameters.
    Criteria(CriteriaArgs),
    /// One path of the configured model, written as a trajectory table.
    SingleRun,
    /// Phase diagram of the flocking indicator over two parameters.
    Sweep,
    /// Truncation bias of Monte-Carlo second moments of geometric Brownian motion.
    GbmBias(GbmBiasArgs),
    /// Fundamental solution of the scalar delay equation and its L2 criterion.
    Fundamental(FundamentalArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct CriteriaArgs {
    #[arg(long)]
    lambda: Option<f64>,
    /// Largest noise strength over the agents.
    #[arg(long = "sigma")]
    sigma_max: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Young's inequality parameter; defaults to λ/(λ − σ²).
    #[arg(long)]
    delta: Option<f64>,
    /// Lipschitz constant of the communication rate.
    #[arg(long = "lipschitz", default_value_t = 0.0)]
    lipschitz: f64,
    /// Lower bound of the Fiedler value along the flow.
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct GbmBiasArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct FundamentalArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Evaluate the L2 criterion against 1/σ².
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Self::Numerical(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Input(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.ensemble.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if cli.workers == Some(0) {
        return Err(Failure::Input("--workers must be at least 1".into()));
    }
    match cli.command {
        Command::Criteria(args) => criteria(&config, &args),
        Command::SingleRun => single_run(config).map(|_| ExitCode::SUCCESS),
        Command::Sweep => sweep(config, cli.workers).map(|_| ExitCode::SUCCESS),
        Command::GbmBias(args) => gbm_bias(config, &args).map(|_| ExitCode::SUCCESS),
        Command::Fundamental(args) => fundamental(config, &args).map(|_| ExitCode::SUCCESS),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| format!("{v:.17e}"))
}

fn criteria(config: &Config, args: &CriteriaArgs) -> CliResult<ExitCode> {
    let lambda = args.lambda.unwrap_or(config.model.lambda);
    let sigma_max = args.sigma_max.unwrap_or_else(|| {
        config
            .model
            .sigmas
            .iter()
            .copied()
            .fold(config.model.sigma, f64::max)
    });
    let tau = args.tau.unwrap_or(config.grid.tau);
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Failure::Input(format!(
            "delay must be non-negative, got {tau}"
        )));
    }
    let report = critical_delay(lambda, sigma_max)?;
    let bound = dgbm_bound(lambda, sigma_max)?;
    let regime = classify_delayed_ode(lambda, tau)?;
    let delta = args.delta.or_else(|| default_delta(lambda, sigma_max));
    let lyap = delta
        .map(|d| lyapunov_params(lambda, sigma_max, tau, d, args.lipschitz, args.ell))
        .transpose()?;
    let sufficient = lyap.is_some_and(|l| l.flocking_sufficient());

    println!("# sufficient flocking conditions");
    println!("lambda = {lambda:.17e}");
    println!("sigma_max = {sigma_max:.17e}");
    println!("tau = {tau:.17e}");
    println!("noise_condition = {}", report.noise_ok);
    println!("kappa_max = {:.17e}", report.kappa_max);
    println!("kappa_condition = {}", report.kappa_form_ok);
    println!("critical_delay = {}", opt(report.tau_c));
    println!("critical_delay_kappa_form = {}", opt(report.kappa_tau_c));
    println!("# alternative normalization, reported for comparison only");
    println!("critical_delay_variant = {}", opt(report.variant_tau_c));
    println!("delay_admitted = {}", report.admits_delay(tau));
    println!("dgbm_bound = {}", opt(bound));
    println!("regime = \"{}\"", regime.name());
    match lyap {
        Some(l) => {
            println!("delta = {:.17e}", l.delta);
            println!("p = {:.17e}", l.p);
            println!("q = {:.17e}", l.q);
            println!("lyapunov_margin = {:.17e}", l.margin);
            println!("decay_rate = {}", opt(l.decay_rate()));
        }
        None => println!("# no admissible delta: the noise condition fails"),
    }
    println!("flocking_sufficient = {sufficient}");
    Ok(if sufficient {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

struct Run {
    manifest: RunManifest,
    started: Instant,
    dir: PathBuf,
}

impl Run {
    fn start(command: &str, config: &Config) -> CliResult<Self> {
        let dir = config.output.dir.clone();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            manifest: RunManifest::new(command, config.ensemble.seed),
            started: Instant::now(),
            dir,
        })
    }

    fn write(&mut self, name: &str, data: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, data)?;
        self.manifest.outputs.push(name.into());
        Ok(path)
    }

    fn finish(mut self, config: &Config) -> CliResult<PathBuf> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        self.manifest.finished_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let text = manifest_toml(&self.manifest, config)?;
        let name = format!("{}.manifest.toml", self.manifest.command);
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn report_written(paths: &[&Path]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn single_run(config: Config) -> CliResult<()> {
    let spec = config.model_spec()?;
    let grid = config.integration_grid()?;
    let system = spec.system()?;
    let mut run = Run::start("single-run", &config)?;
    let traj = simulate_path(
        &system,
        &grid,
        SeedMaterial::new(config.ensemble.seed, 0, 0, 0),
    )?;

    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &system, &traj, config.output.thin)?;
    let data = run.write("single-run.csv", &csv)?;
    run.manifest.snapped_tau = vec![grid.tau()];
    run.manifest.diverged_paths = vec![usize::from(traj.is_diverged())];

    match traj.diverged_at {
        Some(k) => eprintln!("path diverged at t = {}", grid.time(k)),
        None => {
            let start = grid.window_start(INDICATOR_WINDOW)?;
            let offset = spec.velocity_offset();
            let i = path_indicator(
                &traj.states[start * traj.width..],
                traj.width,
                offset..offset + spec.n_agents * spec.dim,
                spec.n_agents,
                grid.dt(),
            );
            println!("indicator = {i:.17e}");
        }
    }
    let manifest = run.finish(&config)?;
    report_written(&[&data, &manifest]);
    Ok(())
}

fn sweep(config: Config, workers: Option<usize>) -> CliResult<()> {
    let mut spec = config.sweep_spec()?;
    if config.sweep.calibrate_theta {
        spec.theta = calibrate_threshold(config.model.lambda, config.grid.dt, config.grid.t_end)?;
    }
    let mut run = Run::start("sweep", &config)?;
    let grid = run_sweep(&spec, workers)?;

    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &grid, spec.theta)?;
    let data = run.write("sweep.csv", &csv)?;
    run.manifest.theta = Some(spec.theta);
    run.manifest.diverged_paths = grid.diverged.clone();
    run.manifest.snapped_tau = if spec.axis1.param == csdelay::sweep::SweepParam::Tau {
        grid.axis1_values.clone()
    } else if spec.axis2.param == csdelay::sweep::SweepParam::Tau {
        grid.axis2_values.clone()
    } else {
        vec![snap_to_grid(spec.tau, spec.dt)]
    };
    let manifest = run.finish(&config)?;
    report_written(&[&data, &manifest]);
    Ok(())
}

fn gbm_bias(mut config: Config, args: &GbmBiasArgs) -> CliResult<()> {
    let b = &mut config.gbm_bias;
    b.lambda = args.lambda.unwrap_or(b.lambda);
    b.sigma = args.sigma.unwrap_or(b.sigma);
    b.q_paths = args.paths.unwrap_or(b.q_paths);
    b.t_end = args.t_end.unwrap_or(b.t_end);
    b.samples = args.samples.unwrap_or(b.samples);
    let study = gbm_bias_study(&config.gbm_bias_config())?;
    let mut run = Run::start("gbm-bias", &config)?;

    let mut csv = Vec::new();
    write_gbm_bias_csv(&mut csv, &study.rows)?;
    let data = run.write("gbm-bias.csv", &csv)?;
    run.manifest.eta = Some(study.eta);
    println!("eta = {:.17e}", study.eta);
    let manifest = run.finish(&config)?;
    report_written(&[&data, &manifest]);
    Ok(())
}

fn fundamental(mut config: Config, args: &FundamentalArgs) -> CliResult<()> {
    let f = &mut config.fundamental;
    f.lambda = args.lambda.unwrap_or(f.lambda);
    f.tau = args.tau.unwrap_or(f.tau);
    f.t_max = args.t_max.unwrap_or(f.t_max);
    f.dt = args.dt.unwrap_or(f.dt);
    if args.sigma.is_some() {
        f.sigma = args.sigma;
    }
    let f = config.fundamental.clone();
    if !(f.t_max > 0.0 && f.t_max.is_finite() && f.dt > 0.0) {
        return Err(Failure::Input(
            "horizon and time step must be positive".into(),
        ));
    }
    let n_steps = (f.t_max / f.dt).round() as usize;
    let r = fundamental_solution(f.lambda, f.tau, f.dt, n_steps)?;
    let regime = classify_delayed_ode(f.lambda, f.tau)?;
    let l2 = f
        .sigma
        .map(|sigma| l2_criterion(f.lambda, f.tau, sigma, f.t_max, f.dt))
        .transpose()?;
    let mut run = Run::start("fundamental", &config)?;

    let mut csv = Vec::new();
    write_fundamental_csv(&mut csv, f.dt, &r)?;
    let data = run.write("fundamental.csv", &csv)?;
    println!("regime = \"{}\"", regime.name());
    if let Some(l2) = l2 {
        println!("l2_integral = {:.17e}", l2.integral);
        println!("l2_threshold = {:.17e}", l2.threshold);
        println!("l2_tail_fraction = {:.17e}", l2.tail_fraction);
        println!("l2_verdict = \"{:?}\"", l2.verdict);
    }
    let manifest = run.finish(&config)?;
    report_written(&[&data, &manifest]);
    Ok(())
}
