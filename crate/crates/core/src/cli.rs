//! Batch front end: reads an image and an optional mask, runs the certified
//! continuation and writes the restoration, a key–value report and a CSV log.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use crate::density::DensityParams;
use crate::energy::ModelParams;
use crate::grid::{DamageMask, ImageField};
use crate::netpbm::{self, Format, ParseError, Raster};
use crate::solver::{check_max_principle, continuation, ConvergenceRecord, SolverConfig};

/// Mask samples at or above this value mark damaged pixels.
pub const MASK_THRESHOLD: u16 = 128;

pub const CSV_HEADER: &str =
    "outer_iter,delta,inner_iters,I_delta,I,R_hat,gap_rel,grad_inf_norm,max_abs_u,seconds";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Model(#[from] crate::Error),
    #[error("{0}")]
    Invalid(String),
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// An image together with the encoding it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedImage {
    pub field: ImageField<f64>,
    pub format: Format,
    pub maxval: u16,
}

/// Maps samples to `[0, 1]` by division by `maxval`.
pub fn image_from_raster(raster: &Raster) -> Result<LoadedImage, CliError> {
    let scale = f64::from(raster.maxval);
    let data = raster.samples.iter().map(|&s| f64::from(s) / scale).collect();
    let field = ImageField::new(raster.width, raster.height, raster.channels(), data)?;
    Ok(LoadedImage {
        field,
        format: raster.format,
        maxval: raster.maxval,
    })
}

/// Clamps to `[0, 1]`, scales by `maxval` and rounds half to even.
pub fn raster_from_image(field: &ImageField<f64>, format: Format, maxval: u16) -> Result<Raster, CliError> {
    if field.channels() != format.channels() {
        return Err(CliError::Invalid(format!(
            "{format} needs {} channel(s), field has {}",
            format.channels(),
            field.channels()
        )));
    }
    let scale = f64::from(maxval);
    let samples = field
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * scale).round_ties_even() as u16)
        .collect();
    Ok(Raster {
        format,
        width: field.width(),
        height: field.height(),
        maxval,
        samples,
    })
}

pub fn load_image(path: &Path) -> Result<LoadedImage, CliError> {
    let bytes = read_bytes(path)?;
    let raster = netpbm::decode(&bytes).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })?;
    image_from_raster(&raster)
}

pub fn save_image(path: &Path, image: &LoadedImage) -> Result<(), CliError> {
    let raster = raster_from_image(&image.field, image.format, image.maxval)?;
    write_bytes(path, &netpbm::encode(&raster))
}

/// Reads a PGM mask; samples `>= 128` are damaged.
pub fn load_mask(path: &Path, width: usize, height: usize) -> Result<DamageMask, CliError> {
    let bytes = read_bytes(path)?;
    let raster = netpbm::decode(&bytes).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })?;
    mask_from_raster(&raster, width, height)
}

pub fn mask_from_raster(raster: &Raster, width: usize, height: usize) -> Result<DamageMask, CliError> {
    if raster.channels() != 1 {
        return Err(CliError::Invalid(format!("mask must be a PGM, got {}", raster.format)));
    }
    if raster.width != width || raster.height != height {
        return Err(CliError::Invalid(format!(
            "mask is {}×{}, image is {width}×{height}",
            raster.width, raster.height
        )));
    }
    let flags = raster.samples.iter().map(|&s| s >= MASK_THRESHOLD).collect();
    Ok(DamageMask::new(width, height, flags)?)
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "tvcert",
    version,
    about = "Certified inpainting and denoising with a linear-growth TV energy",
    after_help = "Mask polarity: mask pixels with value >= 128 (bright) are damaged and get \
                  no data term; darker pixels are known. Without --mask the whole image is \
                  known and the run is pure denoising.\n\nExit status: 0 when the relative \
                  duality gap reaches --tol and the maximum principle holds, 1 on input or \
                  validation errors, 2 when the solver does not certify."
)]
pub struct Args {
    /// Input image (PGM P2/P5 or PPM P3/P6).
    #[arg(long)]
    pub input: PathBuf,
    /// Damage mask (PGM of the same size); bright pixels are damaged.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Restored image, written in the input's format and maxval.
    #[arg(long)]
    pub output: PathBuf,
    /// Ellipticity exponent of the integrand (> 1).
    #[arg(long, default_value_t = 2.0)]
    pub mu: f64,
    /// Fidelity exponent (> 1).
    #[arg(long, default_value_t = 2.0)]
    pub zeta: f64,
    /// Fidelity weight (> 0).
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta0: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_factor: f64,
    /// Target relative duality gap.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Inner residual tolerance relative to 1 + sup|f|.
    #[arg(long, default_value_t = 1e-8)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_inner_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from a seeded random field instead of the mean-filled data.
    #[arg(long)]
    pub random_init: bool,
    /// Key–value run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-step continuation log.
    #[arg(long)]
    pub log_csv: Option<PathBuf>,
    /// Smoothing of |u - f| in the solver objective, only for zeta < 2.
    #[arg(long, default_value_t = 0.0)]
    pub fidelity_smoothing: f64,
    /// Write zero for all timings so reports are byte-reproducible.
    #[arg(long)]
    pub no_timings: bool,
}

impl Args {
    pub fn model(&self) -> Result<ModelParams<f64>, CliError> {
        let density = DensityParams::new(self.mu, 0.0)?;
        Ok(ModelParams::new(self.lambda, self.zeta, density)?.with_fidelity_smoothing(self.fidelity_smoothing)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>, CliError> {
        let cfg = SolverConfig {
            delta0: self.delta0,
            delta_min: self.delta_min,
            delta_factor: self.delta_factor,
            inner_tol: self.inner_tol,
            inner_max_iters: self.max_inner_iters,
            gap_tol: self.tol,
            seed: self.seed,
            randomize_init: self.random_init,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome summary written as `key = value` lines in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub input: PathBuf,
    pub mask: Option<PathBuf>,
    pub output: PathBuf,
    pub model: ModelParams<f64>,
    pub config: SolverConfig<f64>,
    pub status: String,
    pub primal_value: f64,
    pub dual_value: f64,
    pub relative_gap: f64,
    pub max_principle_passed: bool,
    pub max_principle_margin: f64,
    pub outer_steps: usize,
    pub total_inner_iterations: usize,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("input", &self.input.display());
        kv(
            "mask",
            &self.mask.as_ref().map_or("none".to_string(), |p| p.display().to_string()),
        );
        kv("output", &self.output.display());
        kv("mu", &self.model.density().mu());
        kv("zeta", &self.model.zeta());
        kv("lambda", &self.model.lambda());
        kv("fidelity_smoothing", &self.model.fidelity_smoothing());
        kv("delta0", &self.config.delta0);
        kv("delta_min", &self.config.delta_min);
        kv("delta_factor", &self.config.delta_factor);
        kv("inner_tol", &self.config.inner_tol);
        kv("inner_max_iters", &self.config.inner_max_iters);
        kv("gap_tol", &self.config.gap_tol);
        kv("seed", &self.config.seed);
        kv("random_init", &self.config.randomize_init);
        kv("status", &self.status);
        kv("primal_value", &self.primal_value);
        kv("dual_value", &self.dual_value);
        kv("relative_gap", &self.relative_gap);
        kv("max_principle_passed", &self.max_principle_passed);
        kv("max_principle_margin", &self.max_principle_margin);
        kv("outer_steps", &self.outer_steps);
        kv("total_inner_iterations", &self.total_inner_iterations);
        kv("wall_seconds", &self.wall_seconds);
        s
    }
}

/// One CSV row per outer continuation step, LF line endings.
pub fn records_to_csv(records: &[ConvergenceRecord<f64>], timings: bool) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for (k, r) in records.iter().enumerate() {
        let seconds = if timings { r.wall_seconds } else { 0.0 };
        let _ = writeln!(
            s,
            "{},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            k + 1,
            r.delta,
            r.inner_iterations,
            r.i_delta_value,
            r.i_value,
            r.dual_value,
            r.relative_gap,
            r.residual_inf_norm,
            r.max_abs_u,
            seconds
        );
    }
    s
}

/// Parses `argv` (including the program name) and runs; returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed invocation. `Err` is a validation failure (exit 1); solver
/// failures are reported in the returned exit code.
pub fn execute(args: &Args) -> Result<i32, CliError> {
    let started = Instant::now();
    let model = args.model()?;
    let config = args.solver_config()?;
    let image = load_image(&args.input)?;
    let f = &image.field;
    let mask = match &args.mask {
        Some(p) => load_mask(p, f.width(), f.height())?,
        None => DamageMask::none(f.width(), f.height())?,
    };

    let mut report = RunReport {
        input: args.input.clone(),
        mask: args.mask.clone(),
        output: args.output.clone(),
        model,
        config,
        status: String::new(),
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        relative_gap: f64::INFINITY,
        max_principle_passed: false,
        max_principle_margin: f64::NAN,
        outer_steps: 0,
        total_inner_iterations: 0,
        wall_seconds: 0.0,
    };

    let code = match continuation(f, &mask, &model, &config) {
        Ok(out) => {
            let mp = check_max_principle(&out.u, f, &mask);
            let certified = out.gap_reached(config.gap_tol);
            report.primal_value = out.certificate.primal_value;
            report.dual_value = out.certificate.dual_value;
            report.relative_gap = out.certificate.relative_gap;
            report.max_principle_passed = mp.passed;
            report.max_principle_margin = mp.margin;
            report.outer_steps = out.records.len();
            report.total_inner_iterations = out.total_inner_iterations();
            report.status = match (certified, mp.passed) {
                (true, true) => "certified".into(),
                (false, _) => "gap_not_reached".into(),
                (true, false) => "max_principle_violated".into(),
            };
            save_image(
                &args.output,
                &LoadedImage {
                    field: out.u.clone(),
                    format: image.format,
                    maxval: image.maxval,
                },
            )?;
            if let Some(p) = &args.log_csv {
                write_bytes(p, records_to_csv(&out.records, !args.no_timings).as_bytes())?;
            }
            if certified && mp.passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            report.status = format!("solver_error: {e}");
            if let Some(p) = &args.log_csv {
                write_bytes(p, records_to_csv(&[], false).as_bytes())?;
            }
            2
        }
    };
    if !args.no_timings {
        report.wall_seconds = started.elapsed().as_secs_f64();
    }
    if let Some(p) = &args.report {
        write_bytes(p, report.to_text().as_bytes())?;
    }
    Ok(code)
}
