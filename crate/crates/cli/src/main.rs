use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use dilation_curves::corr::{
    estimate_ensemble_correlation, gen_pc_process, gen_stationary_ar, validate_spd,
    EstimateOptions, PSD_TOLERANCE,
};
use dilation_curves::curves::{
    close_curve, dilation_translation, from_dilation, spline_resample, ManifoldCurve,
};
use dilation_curves::dilation::{
    build_dilation_sequence, extract_schur_params, orthogonality_defect, reconstruct_correlation,
    DilationSequence,
};
use dilation_curves::io::{self, CurveFile, Format};
use dilation_curves::shape::{distance_matrix, karcher_mean, DistanceKind, MAX_STEP};
use dilation_curves::{Error, ErrorClass, Result};

/// Correlation matrices to rotation sequences to curves on SO(n), and
/// elastic shape distances between those curves.
#[derive(Parser)]
#[command(name = "dilcurve", version)]
struct Cli {
    /// Output encoding; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Suppress the summary printed on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Comparison {
    /// DP lattice size; defaults to the largest segment count.
    #[arg(long)]
    grid: Option<usize>,
    /// Largest step of the DP lattice along either axis.
    #[arg(long, default_value_t = MAX_STEP)]
    max_step: usize,
    /// Spline-resample every curve to this many segments first.
    #[arg(long)]
    resample: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic correlation matrix or realizations.
    #[command(subcommand)]
    Synth(Synth),
    /// Ensemble correlation matrix of realizations (one per CSV row).
    Estimate {
        input: PathBuf,
        /// Matrix size; defaults to the realization length.
        #[arg(long)]
        n: Option<usize>,
        /// Fail instead of clipping eigenvalues of an indefinite estimate.
        #[arg(long)]
        no_repair: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Schur parameters of a correlation matrix.
    Parcors {
        input: PathBuf,
        #[arg(long, default_value_t = PSD_TOLERANCE)]
        psd_tolerance: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Rotation sequence of a parameter file, written as a curve.
    Dilate {
        input: PathBuf,
        /// Truncation size; defaults to the matrix size.
        #[arg(long)]
        dim: Option<usize>,
        /// Close the trajectory.
        #[arg(long)]
        closed: bool,
        /// Spline-resample the curve to this many segments.
        #[arg(long)]
        resample: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Correlation matrix from a curve or rotation sequence.
    Reconstruct {
        /// Curve file, sequence JSON, or directory of CSV matrices.
        input: PathBuf,
        /// Largest lag to fill in; defaults to the truncation window.
        #[arg(long)]
        max_lag: Option<usize>,
        /// Report the largest deviation from this matrix.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Pairwise distances between curve files.
    Dist {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Elastic distance, minimized over reparametrizations (default).
        #[arg(long, group = "kind")]
        shape: bool,
        /// Plain distance between square-root velocity representations.
        #[arg(long, group = "kind")]
        curve: bool,
        /// Elastic distance, also minimized over start points of closed curves.
        #[arg(long, group = "kind")]
        closed: bool,
        #[command(flatten)]
        cmp: Comparison,
        #[command(flatten)]
        out: Output,
    },
    /// Elastic mean of curve files.
    Mean {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[command(flatten)]
        cmp: Comparison,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum Synth {
    /// Correlation matrix of a stationary AR(1) process.
    Ar {
        #[arg(long, allow_hyphen_values = true)]
        coefficient: f64,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Realizations of an AR(1) process with periodic innovation gain.
    Pc {
        #[arg(long, allow_hyphen_values = true)]
        coefficient: f64,
        #[arg(long)]
        period: usize,
        #[arg(long, default_value_t = 0.5)]
        depth: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::Io(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        io::read_text(path)
    }
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(p) => io::write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(format!("stdout: {e}"))),
    }
}

struct Ctx {
    format: Option<Format>,
    quiet: bool,
}

impl Ctx {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn write_curve(ctx: &Ctx, out: &Output, file: &CurveFile) -> Result<()> {
    let text = match ctx.format_or(Format::Json) {
        Format::Json => io::write_curve(file)?,
        Format::Csv => io::write_curve_csv(&file.curve),
    };
    emit(out, &text)
}

fn load_curves(inputs: &[PathBuf], resample: Option<usize>) -> Result<Vec<ManifoldCurve>> {
    inputs
        .iter()
        .map(|p| {
            let c = io::parse_curve(&read_input(p)?)?.curve;
            match resample {
                Some(m) => spline_resample(&c, m),
                None => Ok(c),
            }
        })
        .collect()
}

fn default_grid(curves: &[ManifoldCurve], grid: Option<usize>) -> usize {
    grid.unwrap_or_else(|| {
        curves
            .iter()
            .map(ManifoldCurve::segments)
            .max()
            .unwrap_or(1)
    })
}

/// Loads whatever `reconstruct` accepts and returns the matrices that carry
/// reconstruction information.
fn load_sequence(path: &Path) -> Result<DilationSequence> {
    if path.is_dir() {
        return io::read_sequence_dir(path);
    }
    let text = read_input(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let is_curve = value.get("points").is_some();
    if !is_curve {
        return io::parse_sequence(&text);
    }
    let file = io::parse_curve(&text)?;
    if let Some(seq) = file.sequence {
        return Ok(seq);
    }
    let Some(t) = file.translation else {
        return Err(Error::InvalidArgument(
            "curve file carries neither a sequence nor a translation".into(),
        ));
    };
    let r = file
        .correction
        .unwrap_or_else(|| DMatrix::identity(t.nrows(), t.nrows()));
    let points = file.curve.points();
    let last = if file.curve.is_closed() && points.len() > 1 {
        points.len() - 1
    } else {
        points.len()
    };
    DilationSequence::new(
        points[..last]
            .iter()
            .map(|p| p.matrix() * &r * &t)
            .collect(),
    )
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        format: cli.format.map(Format::from),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Synth(Synth::Ar {
            coefficient,
            n,
            out,
        }) => {
            let r = gen_stationary_ar(coefficient, n)?;
            emit(
                &out,
                &io::write_matrix(r.as_matrix(), ctx.format_or(Format::Csv))?,
            )
        }
        Command::Synth(Synth::Pc {
            coefficient,
            period,
            depth,
            n,
            count,
            seed,
            out,
        }) => {
            let set = gen_pc_process(coefficient, period, depth, n, count, seed)?;
            emit(&out, &io::write_realizations(&set))
        }
        Command::Estimate {
            input,
            n,
            no_repair,
            out,
        } => {
            let set = io::parse_realizations(&read_input(&input)?)?;
            let n = n.unwrap_or(set.length());
            let options = EstimateOptions {
                repair: !no_repair,
                ..EstimateOptions::default()
            };
            let est = estimate_ensemble_correlation(&set, n, options)?;
            if est.repaired {
                ctx.note("estimate was indefinite; eigenvalues clipped");
            }
            emit(
                &out,
                &io::write_matrix(est.matrix.as_matrix(), ctx.format_or(Format::Csv))?,
            )
        }
        Command::Parcors {
            input,
            psd_tolerance,
            out,
        } => {
            let m = io::parse_matrix(&read_input(&input)?)?;
            let r = validate_spd(&m, psd_tolerance)?;
            let p = extract_schur_params(&r)?;
            if !p.degenerate().is_empty() {
                ctx.note(format!(
                    "{} parameters undetermined and set to zero",
                    p.degenerate().len()
                ));
            }
            emit(
                &out,
                &io::write_schur_params(&p, ctx.format_or(Format::Json))?,
            )
        }
        Command::Dilate {
            input,
            dim,
            closed,
            resample,
            out,
        } => {
            let p = io::parse_schur_params(&read_input(&input)?)?;
            let dim = dim.unwrap_or(p.n());
            let seq = build_dilation_sequence(&p, dim)?;
            let mut curve = from_dilation(&seq, false);
            if closed {
                curve = close_curve(&curve)?;
            }
            if let Some(m) = resample {
                curve = spline_resample(&curve, m)?;
            }
            let defect = seq
                .matrices()
                .iter()
                .map(orthogonality_defect)
                .fold(0.0, f64::max);
            ctx.note(format!(
                "{} rotations of size {dim}, {} on the trajectory; max |W'W - I| = {defect:e}",
                seq.len(),
                seq.complete()
            ));
            let file = CurveFile {
                curve,
                translation: Some(dilation_translation(&seq)),
                correction: None,
                sequence: Some(seq),
            };
            write_curve(&ctx, &out, &file)
        }
        Command::Reconstruct {
            input,
            max_lag,
            reference,
            out,
        } => {
            let seq = load_sequence(&input)?;
            let n = seq.len() + 1;
            let window = (seq.dim() - 1).min(n - 1);
            let max_lag = max_lag.unwrap_or(window);
            if max_lag > seq.dim() - 1 {
                return Err(Error::TruncationWindowExceeded {
                    lag: max_lag,
                    dim: seq.dim(),
                });
            }
            let mut m = DMatrix::from_element(n, n, f64::NAN);
            for i in 0..n {
                m[(i, i)] = 1.0;
                for j in i + 1..n.min(i + max_lag + 1) {
                    let v = reconstruct_correlation(&seq, i, j)?;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            if let Some(path) = reference {
                let r = io::parse_matrix(&read_input(&path)?)?;
                if r.nrows() != n || r.ncols() != n {
                    return Err(Error::DimMismatch {
                        left: n,
                        right: r.nrows(),
                    });
                }
                let err = m
                    .iter()
                    .zip(r.iter())
                    .filter(|(a, _)| !a.is_nan())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                ctx.note(format!("max error {err:e} over lags <= {max_lag}"));
            } else {
                let defect = seq
                    .matrices()
                    .iter()
                    .map(orthogonality_defect)
                    .fold(0.0, f64::max);
                ctx.note(format!(
                    "{n}x{n} matrix, lags <= {max_lag}; max |W'W - I| = {defect:e}"
                ));
            }
            emit(&out, &io::write_matrix(&m, ctx.format_or(Format::Csv))?)
        }
        Command::Dist {
            inputs,
            shape: _,
            curve,
            closed,
            cmp,
            out,
        } => {
            let curves = load_curves(&inputs, cmp.resample)?;
            let kind = if curve {
                DistanceKind::Curve
            } else if closed {
                DistanceKind::ClosedShape
            } else {
                DistanceKind::Shape
            };
            let grid = default_grid(&curves, cmp.grid);
            let d = distance_matrix(&curves, kind, grid, cmp.max_step)?;
            let ids: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
            emit(
                &out,
                &io::write_distance_matrix(&ids, &d, ctx.format_or(Format::Csv))?,
            )
        }
        Command::Mean {
            inputs,
            iterations,
            cmp,
            out,
        } => {
            let curves = load_curves(&inputs, cmp.resample)?;
            let grid = default_grid(&curves, cmp.grid);
            let mean = karcher_mean(&curves, iterations, grid, cmp.max_step)?;
            ctx.note(format!(
                "{} iterations, last change {:e}",
                mean.iterations, mean.change
            ));
            write_curve(&ctx, &out, &CurveFile::plain(mean.curve))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Degeneracy => 3,
        ErrorClass::WindowOrGrid => 4,
        ErrorClass::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
