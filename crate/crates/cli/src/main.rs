use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynlab::report::{run_experiment, scan_family, CheckKind, ExperimentConfig, Family, ReportBundle};
use dynlab::DynError;

/// Backward contraction, large derivatives, pullbacks, rays and puzzles for
/// polynomial and interval dynamics.
#[derive(Parser, Debug)]
#[command(name = "dynlab", version)]
struct Cli {
    /// Experiment config (flat TOML); subcommand flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON/CSV/SVG artifacts; without it JSON goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Default)]
struct ComplexMap {
    /// Real part of c in z^2 + c.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c_im: Option<f64>,
    /// Polynomial coefficients, constant first (real parts).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients_im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RealFamily {
    Logistic,
    Quadratic,
    Polynomial,
}

#[derive(Args, Debug)]
struct RealMap {
    #[arg(long, value_enum, default_value = "logistic")]
    family: RealFamily,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    domain: Option<Vec<f64>>,
    /// Drop critical points attracted to cycles from the checks.
    #[arg(long)]
    exclude_attracted: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward orbit with the derivative cocycle.
    Orbit {
        #[command(flatten)]
        map: ComplexMap,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        start_im: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Critical points and their fates.
    Classify {
        #[command(flatten)]
        map: ComplexMap,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Enumerate the components of f^-n of a round disk.
    Pullback {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        disk: DiskArgs,
    },
    /// Backward contraction BC(r).
    CheckBc {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        bc: BcArgs,
    },
    /// Large derivatives LD(K).
    CheckLd {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        ld: LdArgs,
    },
    /// Univalent pullback condition.
    CheckUpb {
        #[command(flatten)]
        map: ComplexMap,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        delta_prime: Option<f64>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Distortion constant of the dyadic scale structure.
    Kappa0 {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Split a critical orbit segment into return blocks.
    Decompose {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        scale: ScaleArgs,
        /// Orbit length S.
        #[arg(long)]
        s: Option<usize>,
    },
    /// Trace an external ray, e.g. --angle 1/7.
    Ray {
        #[command(flatten)]
        map: ComplexMap,
        #[arg(long)]
        angle: Option<String>,
        #[arg(long)]
        g_start: Option<f64>,
        #[arg(long)]
        g_min: Option<f64>,
    },
    /// Build a puzzle and audit its Markov property.
    Puzzle {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        puzzle: PuzzleArgs,
    },
    /// Check that the deepest puzzle pieces are nice.
    Nice {
        #[command(flatten)]
        map: ComplexMap,
        #[command(flatten)]
        puzzle: PuzzleArgs,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Checks for interval maps.
    Interval {
        #[command(subcommand)]
        command: IntervalCommand,
    },
    /// Run the config's checks along a parameter axis.
    Scan {
        /// c_re, c_im, a or bc_r.
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
}

#[derive(Subcommand, Debug)]
enum IntervalCommand {
    Orbit {
        #[command(flatten)]
        map: RealMap,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    Pullback {
        #[command(flatten)]
        map: RealMap,
        #[command(flatten)]
        disk: DiskArgs,
    },
    CheckBc {
        #[command(flatten)]
        map: RealMap,
        #[command(flatten)]
        bc: BcArgs,
    },
    CheckLd {
        #[command(flatten)]
        map: RealMap,
        #[command(flatten)]
        ld: LdArgs,
    },
    /// Real Schwarz ratio probe.
    Schwarz {
        #[command(flatten)]
        map: RealMap,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct DiskArgs {
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    center_im: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    branch_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct BcArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    /// Number of dyadic δ levels.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    branch_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct LdArgs {
    #[arg(long = "k")]
    k: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct ScaleArgs {
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args, Debug)]
struct PuzzleArgs {
    /// Cut angles, e.g. 1/7,2/7,4/7.
    #[arg(long, value_delimiter = ',')]
    angles: Option<Vec<String>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ComplexMap {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if self.coefficients.is_some() {
            cfg.family = Family::Polynomial;
        } else if cfg.family.is_real() || self.c.is_some() || self.c_im.is_some() {
            cfg.family = Family::Quadratic;
        }
        set(&mut cfg.c_re, self.c);
        set(&mut cfg.c_im, self.c_im);
        set(&mut cfg.coefficients, self.coefficients);
        set(&mut cfg.coefficients_im, self.coefficients_im);
    }
}

impl RealMap {
    fn apply(self, cfg: &mut ExperimentConfig) {
        cfg.family = match self.family {
            RealFamily::Logistic => Family::Logistic,
            RealFamily::Quadratic => Family::RealQuadratic,
            RealFamily::Polynomial => Family::RealPolynomial,
        };
        set(&mut cfg.a, self.a);
        set(&mut cfg.c_re, self.c);
        set(&mut cfg.coefficients, self.coefficients);
        set(&mut cfg.domain, self.domain);
        cfg.exclude_attracted |= self.exclude_attracted;
    }
}

impl DiskArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.pullback_center_re, self.center);
        set(&mut cfg.pullback_center_im, self.center_im);
        set(&mut cfg.pullback_radius, self.radius);
        set(&mut cfg.pullback_depth, self.depth);
        set(&mut cfg.branch_cap, self.branch_cap);
    }
}

impl BcArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.bc_r, self.r);
        set(&mut cfg.bc_delta0, self.delta0);
        set(&mut cfg.bc_levels, self.levels);
        set(&mut cfg.bc_depth, self.depth);
        set(&mut cfg.branch_cap, self.branch_cap);
    }
}

impl LdArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.ld_k, self.k);
        set(&mut cfg.ld_radius, self.radius);
        set(&mut cfg.ld_iterations, self.iterations);
    }
}

impl ScaleArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.kappa0_delta0, self.delta0);
        set(&mut cfg.kappa0_levels, self.levels);
    }
}

impl PuzzleArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.puzzle_angles, self.angles);
        set(&mut cfg.puzzle_epsilon, self.epsilon);
        set(&mut cfg.puzzle_depth, self.depth);
    }
}

enum Job {
    Run,
    Scan { parameter: String, values: Vec<f64> },
}

/// Folds a subcommand into the config; `None` keeps the config's own checks.
fn apply(command: Command, cfg: &mut ExperimentConfig) -> Job {
    let only = |cfg: &mut ExperimentConfig, check| cfg.checks = vec![check];
    match command {
        Command::Orbit {
            map,
            start,
            start_im,
            iterations,
        } => {
            map.apply(cfg);
            set(&mut cfg.orbit_start_re, start);
            set(&mut cfg.orbit_start_im, start_im);
            set(&mut cfg.orbit_iterations, iterations);
            only(cfg, CheckKind::Orbit);
        }
        Command::Classify { map, budget } => {
            map.apply(cfg);
            set(&mut cfg.classify_budget, budget);
            only(cfg, CheckKind::Classify);
        }
        Command::Pullback { map, disk } => {
            map.apply(cfg);
            disk.apply(cfg);
            only(cfg, CheckKind::Pullback);
        }
        Command::CheckBc { map, bc } => {
            map.apply(cfg);
            bc.apply(cfg);
            only(cfg, CheckKind::Bc);
        }
        Command::CheckLd { map, ld } => {
            map.apply(cfg);
            ld.apply(cfg);
            only(cfg, CheckKind::Ld);
        }
        Command::CheckUpb {
            map,
            delta,
            delta_prime,
            depth,
        } => {
            map.apply(cfg);
            set(&mut cfg.upb_delta, delta);
            set(&mut cfg.upb_delta_prime, delta_prime);
            set(&mut cfg.upb_depth, depth);
            only(cfg, CheckKind::Upb);
        }
        Command::Kappa0 { map, scale, samples } => {
            map.apply(cfg);
            scale.apply(cfg);
            set(&mut cfg.kappa0_samples, samples);
            only(cfg, CheckKind::Kappa0);
        }
        Command::Decompose { map, scale, s } => {
            map.apply(cfg);
            scale.apply(cfg);
            set(&mut cfg.decompose_s, s);
            only(cfg, CheckKind::Decompose);
        }
        Command::Ray {
            map,
            angle,
            g_start,
            g_min,
        } => {
            map.apply(cfg);
            set(&mut cfg.ray_angle, angle);
            set(&mut cfg.ray_g_start, g_start);
            set(&mut cfg.ray_g_min, g_min);
            only(cfg, CheckKind::Ray);
        }
        Command::Puzzle { map, puzzle } => {
            map.apply(cfg);
            puzzle.apply(cfg);
            only(cfg, CheckKind::Puzzle);
        }
        Command::Nice { map, puzzle, horizon } => {
            map.apply(cfg);
            puzzle.apply(cfg);
            set(&mut cfg.nice_horizon, horizon);
            only(cfg, CheckKind::Nice);
        }
        Command::Interval { command } => match command {
            IntervalCommand::Orbit { map, start, iterations } => {
                map.apply(cfg);
                set(&mut cfg.orbit_start_re, start);
                set(&mut cfg.orbit_iterations, iterations);
                only(cfg, CheckKind::Orbit);
            }
            IntervalCommand::Pullback { map, disk } => {
                map.apply(cfg);
                disk.apply(cfg);
                only(cfg, CheckKind::Pullback);
            }
            IntervalCommand::CheckBc { map, bc } => {
                map.apply(cfg);
                bc.apply(cfg);
                only(cfg, CheckKind::Bc);
            }
            IntervalCommand::CheckLd { map, ld } => {
                map.apply(cfg);
                ld.apply(cfg);
                only(cfg, CheckKind::Ld);
            }
            IntervalCommand::Schwarz {
                map,
                eta,
                trials,
                depth,
            } => {
                map.apply(cfg);
                set(&mut cfg.schwarz_eta, eta);
                set(&mut cfg.schwarz_trials, trials);
                set(&mut cfg.schwarz_depth, depth);
                only(cfg, CheckKind::Schwarz);
            }
        },
        Command::Scan { parameter, values } => {
            set(&mut cfg.scan_parameter, parameter.map(Some));
            set(&mut cfg.scan_values, values);
            return scan_job(cfg);
        }
    }
    Job::Run
}

fn scan_job(cfg: &ExperimentConfig) -> Job {
    Job::Scan {
        parameter: cfg.scan_parameter.clone().unwrap_or_default(),
        values: cfg.scan_values.clone(),
    }
}

fn emit(bundle: &ReportBundle, out: Option<&PathBuf>) -> Result<(), DynError> {
    match out {
        Some(dir) => {
            for name in bundle.write(dir)? {
                println!("{}", dir.join(name).display());
            }
        }
        None => {
            for o in &bundle.outputs {
                print!("{}", bundle.json(o)?);
            }
        }
    }
    for o in &bundle.outputs {
        if let Some(e) = &o.error {
            eprintln!("{} failed: {e}", o.check.name());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, DynError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.workers, cli.workers);
    let out = cli.out.or_else(|| cfg.out.clone().map(PathBuf::from));
    let job = match cli.command {
        Some(command) => apply(command, &mut cfg),
        None if cfg.scan_parameter.is_some() => scan_job(&cfg),
        None => Job::Run,
    };
    cfg.validate()?;
    match job {
        Job::Run => {
            let bundle = run_experiment(&cfg)?;
            emit(&bundle, out.as_ref())?;
            Ok(if bundle.errored() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Job::Scan { parameter, values } => {
            let scan = scan_family(&cfg, &parameter, &values)?;
            match &out {
                Some(dir) => scan.write(dir)?,
                None => print!("{}", scan.csv()?),
            }
            let failed = scan.rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} scan rows failed");
            }
            Ok(if failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(DynError::Config(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
