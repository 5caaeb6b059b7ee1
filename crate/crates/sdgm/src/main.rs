use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdgm::error::{Error, Result};
use sdgm::partial::{
    invert_spectra, partial_spectrum_direct, recursive_partial, rescaled_inverse,
};
use sdgm::pattern::{load_pattern, CsvSchema, MultiTypePointPattern, ObservationWindow};
use sdgm::pipeline::{analyze, AnalysisConfig};
use sdgm::sim::{parse_sim_spec, simulate};
use sdgm::spectra::{
    auto_periodogram, cross_periodogram, decompose_cross, dft, smooth_complex_field,
    smooth_real_field, spectral_matrix, FrequencyGrid, SmoothingSpec, SpectralMatrixField,
};

#[derive(Parser)]
#[command(
    name = "sdgm",
    about = "Spectral dependence graphs for multivariate spatial point patterns",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the dependence graph of a multi-type point pattern.
    Analyze(AnalyzeArgs),
    /// Dump per-frequency spectral estimates as CSV.
    Spectra(SpectraArgs),
    /// Simulate a multi-type pattern from a simulation spec file.
    Simulate(SimulateArgs),
    /// Verify that the three partial-coherence routes agree numerically.
    OracleCheck(OracleArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file with one event per row ('-' for stdin).
    input: PathBuf,
    /// Column holding the x coordinate.
    #[arg(long, default_value = "x")]
    x_column: String,
    /// Column holding the y coordinate.
    #[arg(long, default_value = "y")]
    y_column: String,
    /// Column holding the type label.
    #[arg(long, default_value = "type")]
    type_column: String,
    /// Observation window as 'xmin,ymin,xmax,ymax' (bounding box if absent).
    #[arg(long)]
    window: Option<String>,
}

#[derive(Args, Clone)]
struct TuningArgs {
    /// Half-plane grid extent P (frequencies p in 0..=P, q in -P..P).
    #[arg(long)]
    grid_p: Option<u32>,
    /// Daniell smoothing half-width, or 'auto'.
    #[arg(long)]
    smooth_h: Option<String>,
    /// Ridge scale for ill-conditioned spectral matrices.
    #[arg(long)]
    ridge: Option<f64>,
    /// Keep the zero frequency in smoothing and suprema.
    #[arg(long)]
    include_dc: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Edge threshold in (0, 1); an edge needs sup > alpha strictly.
    #[arg(long)]
    alpha: Option<f64>,
    /// Threshold the squared statistic sup |d|^2 instead of sup |d|.
    #[arg(long)]
    square_statistic: bool,
    /// Permit a 2-type pattern (plain coherence, no partialisation).
    #[arg(long)]
    allow_bivariate: bool,
    /// Flat 'key = value' configuration file (flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the graph as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Write the graph in DOT format.
    #[arg(long)]
    out_dot: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SpectraField {
    /// Auto-periodogram |F|^2 of one type.
    Auto,
    /// Co-spectrum (real part) of a pair.
    Co,
    /// Quadrature spectrum of a pair.
    Quad,
    /// Amplitude spectrum of a pair.
    Amplitude,
    /// Phase spectrum of a pair; masked cells are left empty.
    Phase,
    /// Complex cross-spectrum of a pair (re and im columns).
    Cross,
    /// Absolute partial coherence |d_ij| of a pair (forces smoothing).
    Dij,
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Which estimate to dump.
    #[arg(long, value_enum)]
    field: SpectraField,
    /// Type label (for --field auto).
    #[arg(long = "type")]
    type_label: Option<String>,
    /// Pair of type labels as 'a,b'.
    #[arg(long)]
    pair: Option<String>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation spec file ('-' for stdin).
    spec: PathBuf,
    /// Output CSV file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of types in the synthetic check pattern.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// RNG seed for the synthetic pattern.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of independent synthetic fields to check.
    #[arg(long, default_value_t = 10)]
    replicates: u64,
    #[command(flatten)]
    tuning: TuningArgs,
}

fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reserves exit code 2; numerical failures own it here,
            // so usage errors exit 1 and help/version exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return std::process::ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Spectra(args) => cmd_spectra(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

fn parse_window(text: &str) -> Result<ObservationWindow> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "window must be 'xmin,ymin,xmax,ymax', got '{text}'"
        )));
    }
    let mut nums = [0.0f64; 4];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|e| Error::Config(format!("bad window coordinate '{part}': {e}")))?;
    }
    ObservationWindow::new(nums[0], nums[1], nums[2], nums[3])
}

fn read_source(path: &PathBuf) -> Result<Box<dyn std::io::Read>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(std::io::stdin()))
    } else {
        Ok(Box::new(fs::File::open(path)?))
    }
}

fn load_input(args: &InputArgs) -> Result<MultiTypePointPattern> {
    let schema = CsvSchema {
        x_column: args.x_column.clone(),
        y_column: args.y_column.clone(),
        type_column: args.type_column.clone(),
        window: args.window.as_deref().map(parse_window).transpose()?,
        types: None,
    };
    let (pattern, report) = load_pattern(read_source(&args.input)?, &schema)?;
    if report.duplicates_dropped > 0 {
        eprintln!("note: dropped {} duplicate rows", report.duplicates_dropped);
    }
    Ok(pattern)
}

fn parse_smooth_h(text: &str) -> Result<Option<usize>> {
    if text == "auto" {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|e| Error::Config(format!("bad smoothing half-width '{text}': {e}")))
}

impl TuningArgs {
    fn apply(&self, config: &mut AnalysisConfig) -> Result<()> {
        if let Some(p) = self.grid_p {
            config.grid_p = p;
        }
        if let Some(h) = &self.smooth_h {
            config.smooth_h = parse_smooth_h(h)?;
        }
        if let Some(r) = self.ridge {
            config.ridge_epsilon = r;
        }
        if self.include_dc {
            config.exclude_dc = false;
        }
        Ok(())
    }
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let mut config = AnalysisConfig::default();
    if let Some(path) = &args.config {
        config.apply_config_file(&fs::read_to_string(path)?)?;
    }
    args.tuning.apply(&mut config)?;
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if args.square_statistic {
        config.square_statistic = true;
    }
    if args.allow_bivariate {
        config.allow_bivariate = true;
    }

    let pattern = load_input(&args.input)?;
    let report = analyze(&pattern, &config)?;
    print!("{}", report.summary());
    if let Some(path) = &args.out_json {
        fs::write(path, report.graph.to_json())?;
    }
    if let Some(path) = &args.out_dot {
        fs::write(path, report.graph.to_dot())?;
    }
    Ok(())
}

fn require_type(pattern: &MultiTypePointPattern, label: &str) -> Result<usize> {
    pattern.type_index(label).ok_or_else(|| {
        Error::Validation(format!(
            "unknown type '{label}'; pattern has: {}",
            pattern.types().join(", ")
        ))
    })
}

fn cmd_spectra(args: SpectraArgs) -> Result<()> {
    let mut config = AnalysisConfig::default();
    args.tuning.apply(&mut config)?;
    let pattern = load_input(&args.input)?.rescale_to_unit_square();
    let grid = FrequencyGrid::new(config.grid_p, config.exclude_dc)?;
    // raw estimates by default; --smooth-h opts in (dij always smooths)
    let smoothing = match (&args.tuning.smooth_h, args.field) {
        (None, SpectraField::Dij) => SmoothingSpec {
            half_width: config.half_width_for(pattern.dimension()),
        },
        (None, _) => SmoothingSpec::raw(),
        (Some(_), _) => SmoothingSpec {
            half_width: config.half_width_for(pattern.dimension()),
        },
    };

    let pair = || -> Result<(usize, usize)> {
        let text = args.pair.as_deref().ok_or_else(|| {
            Error::Validation("this field needs --pair 'a,b'".into())
        })?;
        let (a, b) = text.split_once(',').ok_or_else(|| {
            Error::Validation(format!("--pair must be 'a,b', got '{text}'"))
        })?;
        let i = require_type(&pattern, a.trim())?;
        let j = require_type(&pattern, b.trim())?;
        if i == j {
            return Err(Error::Validation("--pair types must differ".into()));
        }
        Ok((i, j))
    };

    let mut out = String::new();
    match args.field {
        SpectraField::Auto => {
            let label = args.type_label.as_deref().ok_or_else(|| {
                Error::Validation("--field auto needs --type <label>".into())
            })?;
            let i = require_type(&pattern, label)?;
            let field = smooth_real_field(&auto_periodogram(&dft(&pattern, i, grid)?), smoothing);
            out.push_str("p,q,value\n");
            for (p, q) in grid.iter() {
                out.push_str(&format!("{p},{q},{}\n", field.value_at(p, q).unwrap()));
            }
        }
        SpectraField::Cross => {
            let (i, j) = pair()?;
            let raw = cross_periodogram(&dft(&pattern, i, grid)?, &dft(&pattern, j, grid)?)?;
            let field = smooth_complex_field(&raw, smoothing);
            out.push_str("p,q,re,im\n");
            for (p, q) in grid.iter() {
                let v = field.value_at(p, q).unwrap();
                out.push_str(&format!("{p},{q},{},{}\n", v.re, v.im));
            }
        }
        SpectraField::Co | SpectraField::Quad | SpectraField::Amplitude | SpectraField::Phase => {
            let (i, j) = pair()?;
            let raw = cross_periodogram(&dft(&pattern, i, grid)?, &dft(&pattern, j, grid)?)?;
            let field = smooth_complex_field(&raw, smoothing);
            let parts = decompose_cross(&field);
            out.push_str("p,q,value\n");
            for (k, (p, q)) in grid.iter().enumerate() {
                let cell = match args.field {
                    SpectraField::Co => Some(parts.co.value_at(p, q).unwrap()),
                    SpectraField::Quad => Some(parts.quad.value_at(p, q).unwrap()),
                    SpectraField::Amplitude => Some(parts.amplitude.value_at(p, q).unwrap()),
                    SpectraField::Phase => parts.phase[k],
                    _ => unreachable!(),
                };
                match cell {
                    Some(v) => out.push_str(&format!("{p},{q},{v}\n")),
                    None => out.push_str(&format!("{p},{q},\n")),
                }
            }
        }
        SpectraField::Dij => {
            let (i, j) = pair()?;
            if pattern.dimension() < 3 && !config.allow_bivariate {
                return Err(Error::Validation(
                    "partial coherence requires d >= 3".into(),
                ));
            }
            let s = spectral_matrix(&pattern, grid, smoothing)?;
            let inv = invert_spectra(&s, config.ridge_epsilon)?;
            let coh = rescaled_inverse(&inv)?;
            out.push_str("p,q,value\n");
            for ((p, q), m) in grid.iter().zip(&coh.values) {
                match m {
                    Some(m) => out.push_str(&format!("{p},{q},{}\n", m[(i, j)])),
                    None => out.push_str(&format!("{p},{q},\n")),
                }
            }
        }
    }
    write_output(args.out.as_ref(), &out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let text = if args.spec.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut buf)?;
        buf
    } else {
        fs::read_to_string(&args.spec)?
    };
    let spec = parse_sim_spec(&text)?;
    let pattern = simulate(&spec)?;
    let mut out = String::from("x,y,type\n");
    for e in pattern.events() {
        out.push_str(&format!("{},{},{}\n", e.x, e.y, pattern.types()[e.type_index]));
    }
    write_output(args.out.as_ref(), &out)
}

/// Random Hermitian positive-definite matrix A A* + I.
fn random_pd(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &a * a.adjoint() + DMatrix::<Complex64>::identity(d, d)
}

/// Worst relative disagreement between the inverse-matrix, Schur and
/// recursive partial-coherence routes, with a description of where.
fn field_route_deviation(s: &SpectralMatrixField, ridge_epsilon: f64) -> Result<(f64, String)> {
    let grid = s.grid;
    let d = s.d;
    let inv = invert_spectra(s, ridge_epsilon)?;
    let coh = rescaled_inverse(&inv)?;
    let mut max_dev = 0.0f64;
    let mut worst = String::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let rest: Vec<usize> = (0..d).filter(|&k| k != i && k != j).collect();
            let f_ij = partial_spectrum_direct(s, i, j, &rest, ridge_epsilon)?;
            let f_ii = partial_spectrum_direct(s, i, i, &rest, ridge_epsilon)?;
            let f_jj = partial_spectrum_direct(s, j, j, &rest, ridge_epsilon)?;
            let r_ij = recursive_partial(s, i, j, &rest)?;
            let r_ii = recursive_partial(s, i, i, &rest)?;
            let r_jj = recursive_partial(s, j, j, &rest)?;
            for (k, (p, q)) in grid.iter().enumerate() {
                if grid.exclude_dc() && grid.is_dc(p, q) {
                    continue;
                }
                let Some(m) = &coh.values[k] else { continue };
                let inverse_route = m[(i, j)];
                let schur = f_ij.value_at(p, q).unwrap().norm()
                    / (f_ii.value_at(p, q).unwrap().re * f_jj.value_at(p, q).unwrap().re).sqrt();
                let recursive = r_ij.value_at(p, q).unwrap().norm()
                    / (r_ii.value_at(p, q).unwrap().re * r_jj.value_at(p, q).unwrap().re).sqrt();
                for (name, other) in [("schur", schur), ("recursive", recursive)] {
                    let denom = inverse_route.abs().max(other.abs()).max(1.0);
                    let dev = (inverse_route - other).abs() / denom;
                    if dev > max_dev {
                        max_dev = dev;
                        worst = format!(
                            "pair ({i}, {j}) at (p={p}, q={q}) via {name}: \
                             {inverse_route} vs {other}"
                        );
                    }
                }
            }
        }
    }
    Ok((max_dev, worst))
}

fn cmd_oracle_check(args: OracleArgs) -> Result<()> {
    if args.d < 3 {
        return Err(Error::Validation(
            "the three-route check needs d >= 3".into(),
        ));
    }
    let mut config = AnalysisConfig::default();
    args.tuning.apply(&mut config)?;
    let grid = FrequencyGrid::new(config.grid_p, config.exclude_dc)?;
    let d = args.d;

    // synthetic per-frequency positive-definite fields; positive-definiteness
    // is what real smoothed spectral matrices provide
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut max_dev = 0.0f64;
    let mut worst = String::new();
    for _ in 0..args.replicates {
        let matrices: Vec<DMatrix<Complex64>> =
            (0..grid.len()).map(|_| random_pd(d, &mut rng)).collect();
        let s = SpectralMatrixField::from_matrices(grid, d, matrices, SmoothingSpec::raw())?;
        let (dev, at) = field_route_deviation(&s, config.ridge_epsilon)?;
        if dev > max_dev {
            max_dev = dev;
            worst = at;
        }
    }

    println!(
        "oracle-check: d={d}, grid P={}, {} frequencies, {} replicates, max route deviation {max_dev:.3e}",
        grid.p_max(),
        grid.len(),
        args.replicates
    );
    if max_dev >= 1e-8 {
        return Err(Error::Numerical(format!(
            "partial-coherence routes disagree: deviation {max_dev:.3e} at {worst}"
        )));
    }
    println!("all routes agree within 1e-8");
    Ok(())
}
