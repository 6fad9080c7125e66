//! The `patch-ot` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 data or format problems, 4 numerical or
//! certificate failures. Diagnostics go to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gmm::{self, DemoConfig};
use crate::io::{self, Dtype, Manifest};
use crate::linalg::TransportKind;
use crate::metrics::curve_to_csv;
use crate::patch::LatentTensor;
use crate::pipeline::{self, ImageTensor, LatentGeometry, DEFAULT_PATCH_SIZE};

#[derive(Debug, Parser)]
#[command(name = "patch-ot", version, about = "Gaussian transport of latent patches and perception/distortion sweeps")]
pub struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit patch statistics from the latents listed in a manifest.
    FitStats(FitStatsArgs),
    /// Build a transport operator from source and target statistics.
    Build(BuildArgs),
    /// Transport every patch of one latent tensor.
    Transport(TransportArgs),
    /// Blend two tensors: (1 - alpha) * x_hat0 + alpha * x_star, clamped to [0, 1].
    Interpolate(InterpolateArgs),
    /// Trace the perception/distortion curve of paired image sets.
    Sweep(SweepArgs),
    /// Run the 2-D Gaussian-mixture denoising experiment.
    GmmDemo(GmmDemoArgs),
}

#[derive(Debug, Args)]
pub struct FitStatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Statistics of restored latents.
    #[arg(long)]
    pub source: PathBuf,
    /// Statistics of natural latents.
    #[arg(long)]
    pub target: PathBuf,
    /// Channels of the latents the statistics came from.
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    /// Ridge added to an ill-conditioned source covariance (default: 1e-9 * tr / d).
    #[arg(long)]
    pub stab_eps: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub operator: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "f32")]
    pub dtype: Dtype,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub x_star: PathBuf,
    #[arg(long)]
    pub x_hat0: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value = "f32")]
    pub dtype: Dtype,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Manifest of the untouched estimates.
    #[arg(long)]
    pub x_star: PathBuf,
    /// Manifest of transported estimates, paired with `--x-star`.
    #[arg(long, conflicts_with = "operator", required_unless_present = "operator")]
    pub x_hat0: Option<PathBuf>,
    /// Operator used to produce the transported estimates on the fly.
    #[arg(long)]
    pub operator: Option<PathBuf>,
    /// Manifest of unpaired natural images.
    #[arg(long)]
    pub reference: PathBuf,
    /// Manifest of ground-truth images, paired with `--x-star`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comma-separated alphas (default: -1, -0.8, ..., 2).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alphas: Option<Vec<f64>>,
    /// Patch size of the Gelbrich perceptual index.
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GmmDemoArgs {
    /// TOML configuration (default: the bundled one).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 4 when any summary check fails.
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::FitStats(a) => cmd_fit_stats(&a).map(|_| 0),
        Command::Build(a) => cmd_build(&a).map(|_| 0),
        Command::Transport(a) => cmd_transport(&a).map(|_| 0),
        Command::Interpolate(a) => cmd_interpolate(&a).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| 0),
        Command::GmmDemo(a) => cmd_gmm_demo(&a),
    })
}

fn load_latents(manifest: &Path) -> Result<Vec<LatentTensor>> {
    Manifest::load(manifest)?.paths.iter().map(io::read_tensor).collect()
}

fn load_images(manifest: &Path) -> Result<Vec<ImageTensor>> {
    Ok(load_latents(manifest)?.into_iter().map(ImageTensor::new).collect())
}

pub fn cmd_fit_stats(a: &FitStatsArgs) -> Result<()> {
    let latents = load_latents(&a.manifest)?;
    let stats = pipeline::fit_stats_sharded(&latents, a.patch_size)?;
    eprintln!(
        "d = {}, N = {}, condition number = {:.3e}",
        stats.dim(),
        stats.count(),
        stats.cov().condition_number()?
    );
    io::save_stats(&a.out, &stats)
}

pub fn cmd_build(a: &BuildArgs) -> Result<()> {
    let src = io::load_stats(&a.source)?;
    let tgt = io::load_stats(&a.target)?;
    let geometry = LatentGeometry {
        channels: a.channels,
        patch: a.patch_size,
    };
    let t = pipeline::build_transport(&src, &tgt, geometry, a.stab_eps)?;
    let op = t.operator();
    let d = op.dim();
    let dev = (op.linear() - nalgebra::DMatrix::<f64>::identity(d, d)).norm();
    let cert = t.certificate();
    eprintln!(
        "kind = {}, d = {d}, |A - I|_F = {dev:.3e}, stabilization = {:.3e}, covariance residual = {:.3e}, mean residual = {:.3e}",
        match t.kind() {
            TransportKind::Deterministic => "deterministic",
            TransportKind::Stochastic => "stochastic",
        },
        op.stabilization(),
        cert.cov_residual,
        cert.mean_residual
    );
    io::save_operator(&a.out, &t)
}

pub fn cmd_transport(a: &TransportArgs) -> Result<()> {
    let x = io::read_tensor(&a.input)?;
    let t = io::load_operator(&a.operator)?;
    let y = pipeline::transport_latent(&x, &t, a.seed)?;
    io::write_tensor(&a.out, &y, a.dtype)
}

pub fn cmd_interpolate(a: &InterpolateArgs) -> Result<()> {
    let x_star = ImageTensor::new(io::read_tensor(&a.x_star)?);
    let x_hat0 = ImageTensor::new(io::read_tensor(&a.x_hat0)?);
    let blended = pipeline::interpolate(&x_star, &x_hat0, a.alpha)?;
    io::write_tensor(&a.out, blended.tensor(), a.dtype)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let x_star = load_images(&a.x_star)?;
    let x_hat0 = match (&a.x_hat0, &a.operator) {
        (Some(m), _) => load_images(m)?,
        (None, Some(op)) => {
            let t = io::load_operator(op)?;
            x_star
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    pipeline::transport_latent(x.tensor(), &t, a.seed.wrapping_add(i as u64)).map(ImageTensor::new)
                })
                .collect::<Result<_>>()?
        }
        (None, None) => return Err(Error::Config("sweep needs --x-hat0 or --operator".into())),
    };
    let truth = a.truth.as_deref().map(load_images).transpose()?;
    let reference = load_images(&a.reference)?;
    let alphas = a.alphas.clone().unwrap_or_else(pipeline::default_alpha_grid);
    let curve = pipeline::sweep_curve(&x_star, &x_hat0, truth.as_deref(), &reference, &alphas, a.patch_size)?;
    let csv = curve_to_csv(&curve);
    match &a.out {
        Some(path) => io::write_atomic(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn cmd_gmm_demo(a: &GmmDemoArgs) -> Result<i32> {
    let mut config = match &a.config {
        Some(path) => DemoConfig::load(path)?,
        None => DemoConfig::builtin(),
    };
    if let Some(seed) = a.seed {
        config.sampling.seed = seed;
    }
    let out = gmm::run_demo(&config)?;
    gmm::write_demo(&a.out, &out)?;
    for c in &out.summary.checks {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if a.check && !out.summary.all_passed() { 4 } else { 0 })
}
