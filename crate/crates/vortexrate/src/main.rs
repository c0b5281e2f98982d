use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use vortexrate::config::{Command, QuadratureOptions, RunConfig, SimulationOptions, SpectrumSource};
use vortexrate::core::quadrature::Rule;
use vortexrate::core::Dimension;
use vortexrate::format::{Preset, PresetSpec};
use vortexrate::parallel::WORKERS_ENV;
use vortexrate::report::Format;
use vortexrate::{run, RunError, Sweep, EXIT_USAGE};

/// Vortex reconnection, loop birth/death and pair-event rates of isotropic
/// Gaussian random wavefields, with independent numerical checks.
#[derive(Parser, Debug)]
#[command(name = "vortexrate", version, propagate_version = true)]
struct Cli {
    /// Run configuration file (JSON); replaces the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Worker threads for sampling and simulation.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Suppress the per-check summary on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Normalized spectral moments.
    Moments {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        /// Write the correlation matrix and its inverse here (JSON, row-major).
        #[arg(long, value_name = "PATH")]
        dump_matrices: Option<PathBuf>,
    },
    /// Closed-form event rates.
    Rates {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        /// Rates over a parameter: NAME=v1,v2,... or NAME=start:stop:count.
        #[arg(long, value_name = "SPEC", value_parser = parse_sweep)]
        sweep: Option<Sweep>,
    },
    /// Independent checks of the closed forms.
    Verify {
        #[arg(value_enum)]
        chain: Chain,
        #[command(flatten)]
        opts: VerifyArgs,
    },
    /// Same as `verify quadrature`.
    VerifyQuadrature(VerifyArgs),
    /// Same as `verify mc`.
    VerifyMc(VerifyArgs),
    /// Same as `verify normalization`.
    VerifyNormalization(VerifyArgs),
    /// Same as `verify all`.
    VerifyAll(VerifyArgs),
    /// Count events in synthesized random wavefields.
    Simulate {
        #[command(flatten)]
        spectrum: SpectrumArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Chain {
    Quadrature,
    Mc,
    Normalization,
    All,
}

#[derive(Args, Debug, Clone)]
struct SpectrumArgs {
    /// Spectrum file (JSON).
    #[arg(long, value_name = "FILE", required_unless_present = "preset", conflicts_with = "preset")]
    spectrum: Option<PathBuf>,
    /// Analytic preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Preset dimension (2 or 3).
    #[arg(long, value_parser = parse_dimension, requires = "preset")]
    dim: Option<Dimension>,
    /// Blackbody frequency scale.
    #[arg(long = "W", visible_alias = "w", requires = "preset")]
    w: Option<f64>,
    /// Wave speed.
    #[arg(long, requires = "preset")]
    c: Option<f64>,
    /// Wavenumber.
    #[arg(long, requires = "preset")]
    k: Option<f64>,
    /// Frequency.
    #[arg(long, requires = "preset", allow_hyphen_values = true)]
    omega: Option<f64>,
    /// Field variance <f^2> of a preset.
    #[arg(long, requires = "preset")]
    field_variance: Option<f64>,
}

impl SpectrumArgs {
    fn source(&self) -> SpectrumSource {
        match (&self.spectrum, self.preset) {
            (Some(p), _) => SpectrumSource::File(p.clone()),
            (None, Some(name)) => SpectrumSource::Preset(PresetSpec {
                name,
                dimension: self.dim,
                w: self.w,
                c: self.c,
                k: self.k,
                omega: self.omega,
                field_variance: self.field_variance,
            }),
            (None, None) => unreachable!("clap requires a spectrum source"),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    /// Seed of every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo samples; scientific notation such as 1e6 is accepted.
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    samples: u64,
    /// Offset of the shifted contours from the real axis.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Truncation of the contour for the Simpson rule.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Evaluation budget of each contour integral.
    #[arg(long, value_parser = parse_count)]
    nodes: Option<u64>,
    /// Contour quadrature rule.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Random coefficient sets per normalization check.
    #[arg(long, default_value_t = 10)]
    cases: usize,
    /// Also count events in synthesized fields (verify all).
    #[arg(long)]
    with_simulation: bool,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RuleArg {
    TanhSinh,
    Simpson,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Box extents x,y[,z],t starting at the origin; derived from the spectrum when absent.
    #[arg(long = "box", value_delimiter = ',', value_name = "EXTENTS")]
    extent: Vec<f64>,
    /// Seeding grid SPACING,DT; derived from the spectrum when absent.
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "SPACING,DT")]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    realizations: u64,
    /// Plane waves per realization.
    #[arg(long, default_value_t = 200)]
    n_waves: usize,
    /// Plaquette size of the planar vortex census.
    #[arg(long)]
    census_spacing: Option<f64>,
    /// Evenly spaced time slices of the census, the first at the start time.
    #[arg(long, default_value_t = 1)]
    census_slices: u32,
    /// Write every event here as JSON lines.
    #[arg(long, value_name = "PATH")]
    events: Option<PathBuf>,
}

impl SimArgs {
    fn options(&self) -> anyhow::Result<SimulationOptions> {
        let grid = match self.grid[..] {
            [] => None,
            [spacing, dt] => Some([spacing, dt]),
            _ => bail!("--grid takes SPACING,DT"),
        };
        Ok(SimulationOptions {
            extent: self.extent.clone(),
            grid,
            realizations: self.realizations,
            n_waves: self.n_waves,
            census_spacing: self.census_spacing,
            census_slices: self.census_slices,
            events: self.events.clone(),
        })
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("not a nonnegative integer: {s}"))
    }
}

fn parse_dimension(s: &str) -> Result<Dimension, String> {
    let d: u8 = s.parse().map_err(|_| format!("not a dimension: {s}"))?;
    Dimension::try_from(d).map_err(|e| e.to_string())
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    Sweep::parse(s).map_err(|e| e.to_string())
}

fn verify_config(command: Command, a: &VerifyArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::new(command, a.spectrum.source());
    cfg.seed = a.seed;
    cfg.samples = a.samples;
    cfg.quadrature = QuadratureOptions {
        epsilon: a.epsilon,
        cutoff: a.cutoff,
        nodes: a.nodes.map(|n| n as usize),
        rule: a.rule.map(|r| match r {
            RuleArg::TanhSinh => Rule::TanhSinh,
            RuleArg::Simpson => Rule::AdaptiveSimpson,
        }),
    };
    cfg.normalization_cases = a.cases;
    cfg.with_simulation = a.with_simulation;
    cfg.simulation = a.sim.options()?;
    Ok(cfg)
}

fn build(cli: &Cli) -> anyhow::Result<(RunConfig, Option<Sweep>)> {
    let (mut cfg, sweep) = match (&cli.config, &cli.command) {
        (Some(path), None) => (RunConfig::load(path)?, None),
        (Some(_), Some(_)) => bail!("give either --config or a subcommand, not both"),
        (None, None) => bail!("missing subcommand; see --help"),
        (None, Some(cmd)) => match cmd {
            Cmd::Moments { spectrum, dump_matrices } => {
                let mut c = RunConfig::new(Command::Moments, spectrum.source());
                c.dump_matrices = dump_matrices.clone();
                (c, None)
            }
            Cmd::Rates { spectrum, sweep } => (RunConfig::new(Command::Rates, spectrum.source()), sweep.clone()),
            Cmd::Verify { chain, opts } => {
                let command = match chain {
                    Chain::Quadrature => Command::VerifyQuadrature,
                    Chain::Mc => Command::VerifyMc,
                    Chain::Normalization => Command::VerifyNormalization,
                    Chain::All => Command::VerifyAll,
                };
                (verify_config(command, opts)?, None)
            }
            Cmd::VerifyQuadrature(a) => (verify_config(Command::VerifyQuadrature, a)?, None),
            Cmd::VerifyMc(a) => (verify_config(Command::VerifyMc, a)?, None),
            Cmd::VerifyNormalization(a) => (verify_config(Command::VerifyNormalization, a)?, None),
            Cmd::VerifyAll(a) => (verify_config(Command::VerifyAll, a)?, None),
            Cmd::Simulate { spectrum, sim, seed } => {
                let mut c = RunConfig::new(Command::Simulate, spectrum.source());
                c.seed = Some(*seed);
                c.simulation = sim.options()?;
                (c, None)
            }
        },
    };
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if cli.output.is_some() {
        cfg.output.path = cli.output.clone();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    Ok((cfg, sweep))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cfg, sweep) = match build(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match run(&cfg, sweep.as_ref()) {
        Ok(o) => o,
        Err(e) => {
            let kind = match e {
                RunError::Usage(_) => "error",
                RunError::Numerical(_) => "numerical failure",
            };
            eprintln!("{kind}: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Err(e) = outcome.output.write(cfg.output.format, cfg.output.path.as_deref()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    if !cli.quiet {
        if let Some(sections) = outcome.output.document["sections"].as_array() {
            for c in sections.iter().flat_map(|s| s["checks"].as_array().into_iter().flatten()) {
                if let Ok(c) = serde_json::from_value::<vortexrate::report::Check>(c.clone()) {
                    eprintln!("{}", c.line());
                }
            }
        }
    }
    ExitCode::from(outcome.exit_code())
}
