//! Command-line front end. Results go to stdout, progress to stderr.
//! Exit codes: 0 success, 2 usage or input problems, 3 numeric or runtime
//! failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifiers::{self, Method};
use crate::config::KeyValues;
use crate::data::{DetectionMap, Grid, Signature};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::io::{self, MapFormat};
use crate::mif::{self, Boundary, SiftParams, Support, SupportShape};
use crate::pipeline::{self, BackgroundSelection, PipelineConfig, PipelineOutput};
use crate::synth::{self, SceneSpec};

#[derive(Debug, Parser)]
#[command(name = "plumekit", version, about = "Hyperspectral chemical plume detection with iterative filtering")]
pub struct Cli {
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, global = true, env = "PLUMEKIT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a 1D signal or a 2D map into IMFs and a residual.
    Decompose(DecomposeArgs),
    /// Score a cube against a chemical signature.
    Classify(ClassifyArgs),
    /// ROC curve and AUC of a detection map against a ground-truth mask.
    Roc(RocArgs),
    /// Generate a synthetic scene.
    Synth(SynthArgs),
    /// Run the full detection pipeline from a key = value config file.
    Pipeline(PipelineArgs),
    /// Flip a detection map within its range (x -> max + min - x).
    Reverse(ReverseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SiftArgs {
    /// Inner-loop stopping threshold on the relative change.
    #[arg(long, default_value_t = SiftParams::default().sd_threshold)]
    pub sd: f64,
    /// Maximum number of IMFs.
    #[arg(long, default_value_t = SiftParams::default().max_imfs)]
    pub max_imfs: usize,
    /// Maximum inner iterations per IMF.
    #[arg(long, default_value_t = SiftParams::default().max_inner_iters)]
    pub max_inner_iters: usize,
    /// 2D filter support: ellipsoidal or spherical.
    #[arg(long, default_value_t = SiftParams::default().support_shape)]
    pub support_shape: SupportShape,
    /// Signal extension past the ends: antisymmetric or symmetric.
    #[arg(long, default_value_t = SiftParams::default().boundary)]
    pub boundary: Boundary,
}

impl SiftArgs {
    fn params(&self) -> Result<SiftParams> {
        let params = SiftParams {
            sd_threshold: self.sd,
            max_inner_iters: self.max_inner_iters,
            max_imfs: self.max_imfs,
            support_shape: self.support_shape,
            boundary: self.boundary,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// 1D: signature CSV (or a 1x1 HSC1 cube). 2D: DMP1, CSV map, or a
    /// single-band HSC1 cube.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dims: u8,
    /// Prefix of the written files: <prefix>imf_<k>, <prefix>residual,
    /// <prefix>manifest.txt.
    #[arg(long)]
    pub out_prefix: String,
    /// Re-read the written files and check that they sum to the input.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub sift: SiftArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub sig: PathBuf,
    /// cos, mf or ace.
    #[arg(long, default_value_t = Method::Ace)]
    pub method: Method,
    /// Ground-truth mask; enables the AUC report and `--background mask`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Apply spectral trend removal to the cube first.
    #[arg(long)]
    pub prep: bool,
    /// Remove the first 2D IMF from the score map.
    #[arg(long)]
    pub postp: bool,
    /// Flip the scores before post-processing.
    #[arg(long)]
    pub reverse: bool,
    /// Pixels used for background statistics: all or mask.
    #[arg(long, default_value_t = BackgroundSelection::AllPixels)]
    pub background: BackgroundSelection,
    #[arg(long)]
    pub out: PathBuf,
    /// binary (DMP1), csv or pgm16; inferred from the extension if absent.
    #[arg(long)]
    pub format: Option<MapFormat>,
    #[command(flatten)]
    pub sift: SiftArgs,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    /// Detection map, DMP1 or CSV.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV file for the curve.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mark the CSV for a logarithmic false-positive axis.
    #[arg(long)]
    pub log_x: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec file; the 64x64x40 benchmark scene if absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the scene file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scene file's implant strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Chemical signature; a built-in one if absent.
    #[arg(long)]
    pub sig: Option<PathBuf>,
    #[arg(long)]
    pub out_cube: PathBuf,
    #[arg(long)]
    pub out_mask: PathBuf,
    /// Also write the signature used.
    #[arg(long)]
    pub out_sig: Option<PathBuf>,
}

/// Every flag mirrors the config key of the same name (dashes become
/// underscores) and overrides it.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// key = value file with cube, sig, out and optionally gt, roc_out,
    /// format, log_x, method, prep, postp, reverse, background, sd,
    /// max_imfs, max_inner_iters, support_shape, boundary.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cube: Option<String>,
    #[arg(long)]
    pub sig: Option<String>,
    #[arg(long)]
    pub gt: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub roc_out: Option<String>,
    /// binary, csv or pgm16 [default: from the extension of out].
    #[arg(long)]
    pub format: Option<String>,
    /// on/off [default: off].
    #[arg(long)]
    pub log_x: Option<String>,
    /// cos, mf or ace [default: ace].
    #[arg(long)]
    pub method: Option<String>,
    /// on/off [default: off].
    #[arg(long)]
    pub prep: Option<String>,
    /// on/off [default: off].
    #[arg(long)]
    pub postp: Option<String>,
    /// on/off [default: off].
    #[arg(long)]
    pub reverse: Option<String>,
    /// all or mask [default: all].
    #[arg(long)]
    pub background: Option<String>,
    /// [default: 0.001]
    #[arg(long)]
    pub sd: Option<String>,
    /// [default: 16]
    #[arg(long)]
    pub max_imfs: Option<String>,
    /// [default: 200]
    #[arg(long)]
    pub max_inner_iters: Option<String>,
    /// ellipsoidal or spherical [default: ellipsoidal].
    #[arg(long)]
    pub support_shape: Option<String>,
    /// antisymmetric or symmetric [default: antisymmetric].
    #[arg(long)]
    pub boundary: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReverseArgs {
    /// Detection map, DMP1 or CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<MapFormat>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
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
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Classify(a) => classify(a),
        Command::Roc(a) => roc(a),
        Command::Synth(a) => synth(a),
        Command::Pipeline(a) => run_pipeline(a),
        Command::Reverse(a) => reverse(a),
    })
}

fn format_for(path: &Path, format: Option<MapFormat>) -> MapFormat {
    format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => MapFormat::Csv,
        Some("pgm") => MapFormat::Pgm16,
        _ => MapFormat::Binary,
    })
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn support_string(s: Support) -> String {
    match s {
        Support::Line(l) => l.to_string(),
        Support::Plane { rows, cols } => format!("{rows}x{cols}"),
    }
}

fn manifest(input: &Path, shape: &str, files: &[String], residual: &str, rounds: &[mif::SiftRound]) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "input = {}", input.display());
    let _ = writeln!(m, "shape = {shape}");
    let _ = writeln!(m, "imfs = {}", files.len());
    for (k, (file, round)) in files.iter().zip(rounds).enumerate() {
        let k = k + 1;
        let _ = writeln!(m, "imf_{k} = {file}");
        let _ = writeln!(m, "imf_{k}.support = {}", support_string(round.support));
        let _ = writeln!(m, "imf_{k}.iterations = {}", round.inner_iterations);
        let _ = writeln!(m, "imf_{k}.extrema = {}", round.extrema);
    }
    let _ = writeln!(m, "residual = {residual}");
    m
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_1d_input(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(io::HSC1_MAGIC) {
        let cube = io::decode_hypercube(&bytes)?;
        if cube.pixel_count() != 1 {
            return Err(Error::mismatch(
                format!("cube {}", cube.shape_string()),
                "a single 1D signal (1x1xN cube)",
            ));
        }
        return Ok(cube.pixel(0));
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::MalformedHeader("1D input is not text".into()))?;
    Ok(io::parse_signature(&text)?.values().to_vec())
}

fn read_2d_input(path: &Path) -> Result<Grid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(io::HSC1_MAGIC) {
        let cube = io::decode_hypercube(&bytes)?;
        if cube.bands() != 1 {
            return Err(Error::mismatch(format!("cube {}", cube.shape_string()), "a single-band image"));
        }
        return Grid::new(cube.height(), cube.width(), cube.band(0).to_vec());
    }
    io::read_map_any(path)
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let params = a.sift.params()?;
    let prefix = &a.out_prefix;
    let manifest_path = PathBuf::from(format!("{prefix}manifest.txt"));
    if a.dims == 1 {
        let x = read_1d_input(&a.input).map_err(Error::in_stage("read input"))?;
        let stack = mif::if_decompose_1d(&x, &params).map_err(Error::in_stage("decompose"))?;
        eprintln!("decompose: {} IMFs from {} samples", stack.len(), x.len());
        let mut files = Vec::new();
        for (k, imf) in stack.imfs.iter().enumerate() {
            let file = format!("{prefix}imf_{}.csv", k + 1);
            io::write_signature(&Signature::new(imf.clone())?, &file)?;
            files.push(file);
        }
        let residual = format!("{prefix}residual.csv");
        io::write_signature(&Signature::new(stack.residual.clone())?, &residual)?;
        write_text(&manifest_path, &manifest(&a.input, &x.len().to_string(), &files, &residual, &stack.rounds))?;
        if a.verify {
            let mut sum = io::read_signature(&residual)?.values().to_vec();
            for f in &files {
                for (s, v) in sum.iter_mut().zip(io::read_signature(f)?.values()) {
                    *s += v;
                }
            }
            let tol = 1e-9 * max_abs(&x);
            report_verify(&x, &sum, tol)?;
        }
    } else {
        let map = read_2d_input(&a.input).map_err(Error::in_stage("read input"))?;
        let stack = mif::mif_decompose_2d(&map, &params).map_err(Error::in_stage("decompose"))?;
        eprintln!("decompose: {} IMFs from a {} map", stack.len(), map.shape_string());
        let mut files = Vec::new();
        for (k, imf) in stack.imfs.iter().enumerate() {
            let file = format!("{prefix}imf_{}.dmp", k + 1);
            io::write_detection_map(imf, &file, MapFormat::Binary)?;
            files.push(file);
        }
        let residual = format!("{prefix}residual.dmp");
        io::write_detection_map(&stack.residual, &residual, MapFormat::Binary)?;
        write_text(
            &manifest_path,
            &manifest(&a.input, &map.shape_string(), &files, &residual, &stack.rounds),
        )?;
        if a.verify {
            // components are stored as f32: allow one rounding per file
            let mut sum = io::read_detection_map(&residual)?.into_data();
            let mut tol = 1e-9 * map.max_abs() + f32::EPSILON as f64 * stack.residual.max_abs();
            for (f, imf) in files.iter().zip(&stack.imfs) {
                for (s, v) in sum.iter_mut().zip(io::read_detection_map(f)?.data()) {
                    *s += v;
                }
                tol += f32::EPSILON as f64 * imf.max_abs();
            }
            report_verify(map.data(), &sum, tol)?;
        }
    }
    println!("{}", manifest_path.display());
    Ok(())
}

fn report_verify(input: &[f64], sum: &[f64], tol: f64) -> Result<()> {
    let err = input.iter().zip(sum).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    if err <= tol {
        eprintln!("verify: ok (max error {err:e}, tolerance {tol:e})");
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "verify: components do not sum to the input (max error {err:e}, tolerance {tol:e})"
        )))
        .map_err(Error::in_stage("verify"))
    }
}

fn report_pipeline(out: &PipelineOutput) {
    let r = &out.report;
    if !r.imf_counts.is_empty() {
        let hist: Vec<String> = r.imf_histogram().iter().map(|(k, n)| format!("{k}:{n}")).collect();
        eprintln!("imf counts: {}", hist.join(" "));
    }
    eprintln!("degenerate pixels: {}", r.degenerate_pixel_count);
    for (stage, secs) in &r.timing {
        eprintln!("time {stage}: {secs:.3} s");
    }
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let cube = io::read_hypercube(&a.cube).map_err(Error::in_stage("read cube"))?;
    let sig = io::read_signature(&a.sig).map_err(Error::in_stage("read signature"))?;
    let mask = a.mask.as_ref().map(io::read_mask).transpose().map_err(Error::in_stage("read mask"))?;
    let config = PipelineConfig {
        method: a.method,
        prep: a.prep,
        postp: a.postp,
        reverse: a.reverse,
        background: a.background,
        sift: a.sift.params()?,
    };
    eprintln!("classify: {} cube {}", config.method, cube.shape_string());
    let out = pipeline::run_pipeline(&cube, &sig, &config, mask.as_ref())?;
    report_pipeline(&out);
    io::write_detection_map(&out.map, &a.out, format_for(&a.out, a.format))?;
    if let Some(curve) = &out.roc {
        println!("AUC={:.16e}", curve.auc);
    }
    Ok(())
}

fn roc(a: RocArgs) -> Result<()> {
    let scores = io::read_map_any(&a.scores).map_err(Error::in_stage("read scores"))?;
    let gt = io::read_mask(&a.gt).map_err(Error::in_stage("read ground truth"))?;
    let curve = evaluation::roc(&scores, &gt).map_err(Error::in_stage("roc"))?;
    eprintln!("roc: {} plume and {} background pixels", curve.n_pos, curve.n_neg);
    if let Some(out) = &a.out {
        evaluation::roc_to_csv(&curve, out, a.log_x)?;
    }
    println!("AUC={:.16e}", curve.auc);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => synth::spec_from_file(path).map_err(Error::in_stage("read spec"))?,
        None => SceneSpec::benchmark(0, 1.0),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(alpha) = a.alpha {
        spec.alpha = alpha;
    }
    let sig = match &a.sig {
        Some(path) => io::read_signature(path).map_err(Error::in_stage("read signature"))?,
        None => synth::default_signature(spec.bands),
    };
    let (cube, mask) = synth::generate(&spec, &sig).map_err(Error::in_stage("synth"))?;
    eprintln!("synth: cube {} with seed {} and alpha {}", cube.shape_string(), spec.seed, spec.alpha);
    io::write_hypercube(&cube, &a.out_cube)?;
    io::write_mask(&mask, &a.out_mask)?;
    if let Some(path) = &a.out_sig {
        io::write_signature(&sig, path)?;
    }
    Ok(())
}

fn run_pipeline(a: PipelineArgs) -> Result<()> {
    let mut kv = match &a.config {
        Some(path) => KeyValues::read(path).map_err(Error::in_stage("read config"))?,
        None => KeyValues::default(),
    };
    let overrides = [
        ("cube", &a.cube),
        ("sig", &a.sig),
        ("gt", &a.gt),
        ("out", &a.out),
        ("roc_out", &a.roc_out),
        ("format", &a.format),
        ("log_x", &a.log_x),
        ("method", &a.method),
        ("prep", &a.prep),
        ("postp", &a.postp),
        ("reverse", &a.reverse),
        ("background", &a.background),
        ("sd", &a.sd),
        ("max_imfs", &a.max_imfs),
        ("max_inner_iters", &a.max_inner_iters),
        ("support_shape", &a.support_shape),
        ("boundary", &a.boundary),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            kv.insert(key, v.clone());
        }
    }
    let mut config = PipelineConfig::default();
    config.update_from(&mut kv)?;
    let cube_path: PathBuf = kv.require("cube")?;
    let sig_path: PathBuf = kv.require("sig")?;
    let out_path: PathBuf = kv.require("out")?;
    let gt_path: Option<PathBuf> = kv.take("gt")?;
    let roc_path: Option<PathBuf> = kv.take("roc_out")?;
    let format: Option<MapFormat> = kv.take("format")?;
    let log_x = kv.take::<crate::config::Toggle>("log_x")?.is_some_and(|t| t.0);
    kv.finish()?;

    let cube = io::read_hypercube(&cube_path).map_err(Error::in_stage("read cube"))?;
    let sig = io::read_signature(&sig_path).map_err(Error::in_stage("read signature"))?;
    let gt = gt_path.as_ref().map(io::read_mask).transpose().map_err(Error::in_stage("read ground truth"))?;
    eprintln!(
        "pipeline: {} on {} (prep {}, postp {}, reverse {})",
        config.method,
        cube.shape_string(),
        config.prep,
        config.postp,
        config.reverse
    );
    let out = pipeline::run_pipeline(&cube, &sig, &config, gt.as_ref())?;
    report_pipeline(&out);
    io::write_detection_map(&out.map, &out_path, format_for(&out_path, format))?;
    if let Some(curve) = &out.roc {
        if let Some(path) = &roc_path {
            evaluation::roc_to_csv(curve, path, log_x)?;
        }
        println!("AUC={:.16e}", curve.auc);
    } else if roc_path.is_some() {
        return Err(Error::MissingKey("gt".into()));
    }
    Ok(())
}

fn reverse(a: ReverseArgs) -> Result<()> {
    let map: DetectionMap = io::read_map_any(&a.input).map_err(Error::in_stage("read map"))?;
    let flipped = classifiers::reverse_scores(&map);
    io::write_detection_map(&flipped, &a.out, format_for(&a.out, a.format))
}
