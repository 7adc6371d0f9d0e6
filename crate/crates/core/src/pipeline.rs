//! PreP (per-pixel spectral trend removal), PostP (first 2D IMF removal
//! from a detection map) and the end-to-end detection pipeline.

use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::classifiers::{self, BackgroundStats, Method};
use crate::config::{KeyValues, Toggle};
use crate::data::{DetectionMap, Grid, GroundTruthMask, Hypercube, Signature};
use crate::error::{Error, Result};
use crate::evaluation::{self, RocCurve};
use crate::mif::{self, SiftParams};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineReport {
    /// One entry per pixel for PreP, a single entry for PostP.
    pub imf_counts: Vec<usize>,
    pub degenerate_pixel_count: usize,
    /// Wall-clock seconds per stage.
    pub timing: Vec<(&'static str, f64)>,
}

impl PipelineReport {
    fn merge(&mut self, other: PipelineReport) {
        self.imf_counts.extend(other.imf_counts);
        self.degenerate_pixel_count += other.degenerate_pixel_count;
        self.timing.extend(other.timing);
    }

    /// `(imf count, number of occurrences)`, ascending by count.
    pub fn imf_histogram(&self) -> Vec<(usize, usize)> {
        let mut hist = std::collections::BTreeMap::new();
        for &k in &self.imf_counts {
            *hist.entry(k).or_insert(0) += 1;
        }
        hist.into_iter().collect()
    }
}

/// Everything PreP computes: `output + trend + mean` is the input pixel.
#[derive(Debug, Clone)]
pub struct PrepResult {
    pub output: Hypercube,
    pub trend: Hypercube,
    pub mean: Vec<f64>,
    pub report: PipelineReport,
}

/// Per-band mean over all pixels.
pub fn band_means(cube: &Hypercube) -> Vec<f64> {
    let n = cube.pixel_count() as f64;
    (0..cube.bands()).map(|b| cube.band(b).iter().sum::<f64>() / n).collect()
}

/// Subtracts the global mean spectrum, then removes each pixel's spectral
/// trend, keeping the sum of its IMFs. Spectra with fewer than two extrema
/// are all trend and become zero.
pub fn prep_detailed(cube: &Hypercube, params: &SiftParams) -> Result<PrepResult> {
    if cube.bands() < 3 {
        return Err(Error::InvalidParameter(format!(
            "pre-processing needs at least 3 bands, cube has {}",
            cube.bands()
        )));
    }
    params.validate()?;
    let start = Instant::now();
    let mean = band_means(cube);
    let decomposed: Vec<(Vec<f64>, Vec<f64>, usize)> = cube
        .pixels()
        .into_par_iter()
        .map(|mut s| {
            for (x, m) in s.iter_mut().zip(&mean) {
                *x -= m;
            }
            let stack = mif::if_decompose_1d(&s, params)?;
            let kept: Vec<f64> = s.iter().zip(&stack.residual).map(|(x, r)| x - r).collect();
            let count = stack.len();
            Ok((kept, stack.residual, count))
        })
        .collect::<Result<_>>()?;
    let (h, v, d) = (cube.height(), cube.width(), cube.bands());
    let mut kept = Vec::with_capacity(decomposed.len());
    let mut trend = Vec::with_capacity(decomposed.len());
    let mut imf_counts = Vec::with_capacity(decomposed.len());
    for (k, t, c) in decomposed {
        kept.push(k);
        trend.push(t);
        imf_counts.push(c);
    }
    let report = PipelineReport {
        imf_counts,
        degenerate_pixel_count: 0,
        timing: vec![("prep", start.elapsed().as_secs_f64())],
    };
    Ok(PrepResult {
        output: Hypercube::from_pixels(h, v, d, &kept)?,
        trend: Hypercube::from_pixels(h, v, d, &trend)?,
        mean,
        report,
    })
}

pub fn prep(cube: &Hypercube, params: &SiftParams) -> Result<(Hypercube, PipelineReport)> {
    let r = prep_detailed(cube, params)?;
    Ok((r.output, r.report))
}

/// PostP output together with the component it removed (`None` when the
/// map had too few extrema to yield one).
#[derive(Debug, Clone)]
pub struct PostpResult {
    pub output: DetectionMap,
    pub removed: Option<Grid>,
    pub report: PipelineReport,
}

fn check_postp_shape(map: &DetectionMap) -> Result<()> {
    if map.rows() < 3 || map.cols() < 3 {
        return Err(Error::InvalidParameter(format!(
            "post-processing needs a map of at least 3x3, got {}",
            map.shape_string()
        )));
    }
    Ok(())
}

pub fn postp_detailed(map: &DetectionMap, params: &SiftParams) -> Result<PostpResult> {
    check_postp_shape(map)?;
    let start = Instant::now();
    let params = SiftParams {
        max_imfs: 1,
        ..*params
    };
    let mut stack = mif::mif_decompose_2d(map, &params)?;
    let removed = stack.imfs.pop();
    let output = match removed {
        Some(_) => stack.residual,
        None => map.clone(),
    };
    let report = PipelineReport {
        imf_counts: vec![usize::from(removed.is_some())],
        degenerate_pixel_count: 0,
        timing: vec![("postp", start.elapsed().as_secs_f64())],
    };
    Ok(PostpResult {
        output,
        removed,
        report,
    })
}

/// Removes the first 2D IMF from a detection map.
pub fn postp(map: &DetectionMap, params: &SiftParams) -> Result<(DetectionMap, PipelineReport)> {
    let r = postp_detailed(map, params)?;
    Ok((r.output, r.report))
}

/// Lines with fewer than two extrema are left as they are.
fn remove_first_imf_1d(line: &[f64], params: &SiftParams) -> Result<Vec<f64>> {
    let params = SiftParams {
        max_imfs: 1,
        ..*params
    };
    Ok(mif::if_decompose_1d(line, &params)?.residual)
}

fn along_rows(map: &Grid, params: &SiftParams) -> Result<Grid> {
    let rows: Vec<Vec<f64>> = (0..map.rows())
        .into_par_iter()
        .map(|r| remove_first_imf_1d(map.row(r), params))
        .collect::<Result<_>>()?;
    Grid::new(map.rows(), map.cols(), rows.concat())
}

fn along_cols(map: &Grid, params: &SiftParams) -> Result<Grid> {
    Ok(along_rows(&map.transpose(), params)?.transpose())
}

/// Compares PostP with its separable approximation that removes the first
/// 1D IMF of every row and then every column (and the reverse order).
#[derive(Debug, Clone)]
pub struct RowColReport {
    pub two_d: DetectionMap,
    pub row_then_col: DetectionMap,
    pub col_then_row: DetectionMap,
    /// Relative l2 distances to the 2D result.
    pub row_then_col_distance: f64,
    pub col_then_row_distance: f64,
    /// SHA-256 of the 2D result's little-endian f64 values, hex encoded.
    pub two_d_hash: String,
}

fn relative_distance(a: &Grid, reference: &Grid) -> f64 {
    let diff: f64 = a.data().iter().zip(reference.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = reference.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

/// Hex SHA-256 of a map's values.
pub fn map_hash(map: &Grid) -> String {
    let mut hasher = Sha256::new();
    for x in map.data() {
        hasher.update(x.to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn rowcol_postp_check(map: &DetectionMap, params: &SiftParams) -> Result<RowColReport> {
    let (two_d, _) = postp(map, params)?;
    let row_then_col = along_cols(&along_rows(map, params)?, params)?;
    let col_then_row = along_rows(&along_cols(map, params)?, params)?;
    Ok(RowColReport {
        row_then_col_distance: relative_distance(&row_then_col, &two_d),
        col_then_row_distance: relative_distance(&col_then_row, &two_d),
        two_d_hash: map_hash(&two_d),
        two_d,
        row_then_col,
        col_then_row,
    })
}

/// Which pixels feed the background mean and covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundSelection {
    #[default]
    AllPixels,
    /// Background-labelled pixels of the ground truth.
    Mask,
}

impl std::fmt::Display for BackgroundSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AllPixels => "all",
            Self::Mask => "mask",
        })
    }
}

impl std::str::FromStr for BackgroundSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::AllPixels),
            "mask" => Ok(Self::Mask),
            _ => Err(Error::UnparseableValue {
                key: "background".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub prep: bool,
    pub postp: bool,
    pub reverse: bool,
    pub background: BackgroundSelection,
    pub sift: SiftParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Ace,
            prep: false,
            postp: false,
            reverse: false,
            background: BackgroundSelection::AllPixels,
            sift: SiftParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Takes the keys this config understands out of `kv`, leaving the
    /// rest for the caller.
    pub fn update_from(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(m) = kv.take("method")? {
            self.method = m;
        }
        for (key, slot) in [("prep", &mut self.prep), ("postp", &mut self.postp), ("reverse", &mut self.reverse)] {
            if let Some(Toggle(on)) = kv.take(key)? {
                *slot = on;
            }
        }
        if let Some(b) = kv.take("background")? {
            self.background = b;
        }
        if let Some(x) = kv.take("sd")? {
            self.sift.sd_threshold = x;
        }
        if let Some(x) = kv.take("max_imfs")? {
            self.sift.max_imfs = x;
        }
        if let Some(x) = kv.take("max_inner_iters")? {
            self.sift.max_inner_iters = x;
        }
        if let Some(x) = kv.take("support_shape")? {
            self.sift.support_shape = x;
        }
        if let Some(x) = kv.take("boundary")? {
            self.sift.boundary = x;
        }
        self.sift.validate()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub map: DetectionMap,
    pub roc: Option<RocCurve>,
    pub report: PipelineReport,
}

/// PreP -> background statistics -> classification -> reversal -> PostP
/// -> ROC (when ground truth is given). Errors name the failing stage.
pub fn run_pipeline(
    cube: &Hypercube,
    target: &Signature,
    config: &PipelineConfig,
    gt: Option<&GroundTruthMask>,
) -> Result<PipelineOutput> {
    target.check_against(cube)?;
    if let Some(gt) = gt {
        gt.check_against_cube(cube)?;
    }
    let mut report = PipelineReport::default();

    let prepped;
    let cube = if config.prep {
        let r = prep_detailed(cube, &config.sift).map_err(Error::in_stage("prep"))?;
        report.merge(r.report);
        prepped = r.output;
        &prepped
    } else {
        cube
    };

    let start = Instant::now();
    let stats: Option<BackgroundStats> = match config.method {
        Method::Cos => None,
        Method::Mf | Method::Ace => {
            let mask = match config.background {
                BackgroundSelection::AllPixels => None,
                BackgroundSelection::Mask => Some(gt.ok_or_else(|| {
                    Error::InvalidParameter("background = mask needs a ground-truth mask".into())
                })?),
            };
            Some(classifiers::estimate_background(cube, mask).map_err(Error::in_stage("background"))?)
        }
    };
    let classified = classifiers::classify(cube, target, config.method, stats.as_ref(), config.reverse)
        .map_err(Error::in_stage("classify"))?;
    report.degenerate_pixel_count += classified.degenerate_pixels;
    report.timing.push(("classify", start.elapsed().as_secs_f64()));

    let map = if config.postp {
        let (out, r) = postp(&classified.map, &config.sift).map_err(Error::in_stage("postp"))?;
        report.merge(r);
        out
    } else {
        classified.map
    };

    let roc = match gt {
        Some(gt) => {
            let start = Instant::now();
            let curve = evaluation::roc(&map, gt).map_err(Error::in_stage("roc"))?;
            report.timing.push(("roc", start.elapsed().as_secs_f64()));
            Some(curve)
        }
        None => None,
    };
    Ok(PipelineOutput { map, roc, report })
}
