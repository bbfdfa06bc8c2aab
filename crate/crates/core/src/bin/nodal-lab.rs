//! `nodal-lab`: runs one experiment and writes its outputs and manifest.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nodal_topology::experiment::{config_from_manifest, run, validate, Experiment, ExperimentConfig};
use nodal_topology::Error;

#[derive(Parser)]
#[command(name = "nodal-lab", version, about = "Monte-Carlo laboratory for nodal-set topology")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical planar covariance against the closed form.
    CovarianceCheck(RunArgs),
    /// 1-D zero counts against the exact constant.
    #[command(name = "kacrice-1d")]
    Kacrice1d(RunArgs),
    /// Pooled domain-connectivity measure on a closed surface.
    #[command(name = "measure-omega-2d")]
    MeasureOmega2d(RunArgs),
    /// Pooled tree-end measure on a closed surface.
    #[command(name = "measure-ends-2d")]
    MeasureEnds2d(RunArgs),
    /// Genus measure of nodal surfaces on the 3-torus.
    #[command(name = "genus-3d")]
    Genus3d(RunArgs),
    /// Component-count constant estimate.
    NsConstant(RunArgs),
    /// Realizes and verifies a rooted tree as a nesting end.
    BarrierDemo(RunArgs),
    /// Re-runs the config stored in a manifest.
    Replay {
        manifest: PathBuf,
        /// Output directory; defaults to the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags override values from `--config`.
#[derive(Args, Default)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print config violations and exit without running.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// plane, circle, sphere, torus or torus3.
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Spectral parameter `T`.
    #[arg(long = "t", short = 'T')]
    t: Option<String>,
    /// Sphere degree; sets `T = sqrt(ell (ell + 1))`.
    #[arg(long)]
    ell: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// Samples per wavelength.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    allow_under_resolved: bool,
    #[arg(long)]
    num_waves: Option<String>,
    #[arg(long)]
    lag_step: Option<String>,
    #[arg(long)]
    max_lag: Option<String>,
    /// Canonical tree code such as "(()())".
    #[arg(long)]
    tree: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Skip the per-sample JSON-lines file.
    #[arg(long)]
    no_spool: bool,
}

impl RunArgs {
    fn config(&self, experiment: Experiment) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::new(experiment);
        if let Some(path) = &self.config {
            cfg.apply_file_text(&fs::read_to_string(path)?)?;
            cfg.experiment = experiment;
        }
        let flags = [
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("workers", &self.workers),
            ("out", &self.out),
            ("geometry", &self.geometry),
            ("alpha", &self.alpha),
            ("t", &self.t),
            ("ell", &self.ell),
            ("eta", &self.eta),
            ("resolution", &self.resolution),
            ("num-waves", &self.num_waves),
            ("lag-step", &self.lag_step),
            ("max-lag", &self.max_lag),
            ("tree", &self.tree),
            ("epsilon", &self.epsilon),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.allow_under_resolved {
            cfg.allow_under_resolved = true;
        }
        if self.no_spool {
            cfg.spool = false;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, check) = match cli.command {
        Command::Replay { manifest, out } => match config_from_manifest(&manifest) {
            Ok(mut c) => {
                if let Some(o) = out {
                    c.out = o;
                }
                (c, false)
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        cmd => {
            let (experiment, args) = match cmd {
                Command::CovarianceCheck(a) => (Experiment::CovarianceCheck, a),
                Command::Kacrice1d(a) => (Experiment::Kacrice1d, a),
                Command::MeasureOmega2d(a) => (Experiment::MeasureOmega2d, a),
                Command::MeasureEnds2d(a) => (Experiment::MeasureEnds2d, a),
                Command::Genus3d(a) => (Experiment::Genus3d, a),
                Command::NsConstant(a) => (Experiment::NsConstant, a),
                Command::BarrierDemo(a) => (Experiment::BarrierDemo, a),
                Command::Replay { .. } => unreachable!(),
            };
            match args.config(experiment) {
                Ok(c) => (c, args.check),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
    };
    let violations = validate(&cfg);
    for v in &violations {
        eprintln!("invalid `{}`: {}", v.field, v.message);
    }
    if !violations.is_empty() {
        return ExitCode::from(2);
    }
    if check {
        println!("config ok");
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(m) => {
            println!("{}", serde_json::to_string_pretty(&m.summary).unwrap_or_default());
            println!("wrote {} files to {}", m.outputs.len(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
