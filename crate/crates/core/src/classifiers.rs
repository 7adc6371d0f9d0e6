//! Pixel scoring against a known chemical signature.
//!
//! * COS: squared cosine between pixel and chemical signature.
//! * MF: matched filter, `[(s - mu)' S^-1 c]^2 / (c' S^-1 c)`.
//! * ACE: adaptive cosine estimator, the MF score divided by the Mahalanobis
//!   norm `(s - mu)' S^-1 (s - mu)` of the centred pixel.
//!
//! `mu` and `S` are the background mean and covariance. Every inverse is
//! applied through a Cholesky solve of the regularised covariance
//! `S + eps I`; whitening uses its symmetric inverse square root.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{DetectionMap, Grid, GroundTruthMask, Hypercube, Label, Signature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cos,
    Mf,
    Ace,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cos" => Ok(Method::Cos),
            "mf" => Ok(Method::Mf),
            "ace" => Ok(Method::Ace),
            _ => Err(Error::UnparseableValue {
                key: "method".into(),
                value: s.into(),
            }),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cos => "cos",
            Method::Mf => "mf",
            Method::Ace => "ace",
        })
    }
}

/// Background mean and covariance with the factorisations derived from them.
#[derive(Debug, Clone)]
pub struct BackgroundStats {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    epsilon: f64,
    pixels: usize,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    inv_sqrt: DMatrix<f64>,
}

impl BackgroundStats {
    /// Builds statistics from an explicit mean and (unregularised)
    /// covariance.
    pub fn from_moments(mean: Vec<f64>, covariance: DMatrix<f64>, pixels: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::mismatch(
                format!("mean of length {d}"),
                format!("covariance {}x{}", covariance.nrows(), covariance.ncols()),
            ));
        }
        let mean = DVector::from_vec(mean);
        let max_abs_mean = mean.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let epsilon = (1e-8 * covariance.trace() / d as f64).max(1e-12 * (1.0 + max_abs_mean));
        let regularised = &covariance + DMatrix::identity(d, d) * epsilon;
        let factor = regularised.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let eigen = regularised.symmetric_eigen();
        let scales = eigen.eigenvalues.map(|l| 1.0 / l.max(epsilon).sqrt());
        let inv_sqrt = &eigen.eigenvectors * DMatrix::from_diagonal(&scales) * eigen.eigenvectors.transpose();
        Ok(Self {
            mean,
            covariance,
            epsilon,
            pixels,
            factor,
            inv_sqrt,
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// `(S + eps I)^-1 x`.
    pub fn solve(&self, x: &[f64]) -> DVector<f64> {
        self.factor.solve(&DVector::from_column_slice(x))
    }

    fn check_len(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.bands() {
            return Err(Error::mismatch(
                format!("vector of length {}", s.len()),
                format!("background of {} bands", self.bands()),
            ));
        }
        Ok(())
    }
}

/// Mean and sample covariance (divisor `n - 1`) of the background pixels:
/// those labelled background when a mask is given, otherwise every pixel.
pub fn estimate_background(cube: &Hypercube, mask: Option<&GroundTruthMask>) -> Result<BackgroundStats> {
    let selected: Vec<usize> = match mask {
        Some(mask) => {
            mask.check_against_cube(cube)?;
            mask.labels()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == Label::Background)
                .map(|(p, _)| p)
                .collect()
        }
        None => (0..cube.pixel_count()).collect(),
    };
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let d = cube.bands();
    let n = selected.len();
    let bands: Vec<Vec<f64>> = (0..d)
        .map(|b| {
            let plane = cube.band(b);
            selected.iter().map(|&p| plane[p]).collect()
        })
        .collect();
    let mean: Vec<f64> = bands.iter().map(|x| x.iter().sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = bands
        .iter()
        .zip(&mean)
        .map(|(x, m)| x.iter().map(|v| v - m).collect())
        .collect();
    let mut covariance = DMatrix::zeros(d, d);
    if n > 1 {
        for i in 0..d {
            for j in 0..=i {
                let c = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>() / (n - 1) as f64;
                covariance[(i, j)] = c;
                covariance[(j, i)] = c;
            }
        }
    }
    BackgroundStats::from_moments(mean, covariance, n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared cosine of the angle between `s` and `target`.
pub fn cos_score(s: &[f64], target: &[f64]) -> Result<f64> {
    if s.len() != target.len() {
        return Err(Error::mismatch(
            format!("pixel of length {}", s.len()),
            format!("signature of length {}", target.len()),
        ));
    }
    let ss = dot(s, s);
    let tt = dot(target, target);
    if ss == 0.0 || tt == 0.0 {
        return Err(Error::ZeroVector);
    }
    let st = dot(s, target);
    Ok((st * st / (ss * tt)).min(1.0))
}

fn centred(s: &[f64], stats: &BackgroundStats) -> Vec<f64> {
    s.iter().zip(stats.mean()).map(|(x, m)| x - m).collect()
}

pub fn mf_score(s: &[f64], target: &[f64], stats: &BackgroundStats) -> Result<f64> {
    stats.check_len(s)?;
    stats.check_len(target)?;
    let q = stats.solve(target);
    let denominator = dot(target, q.as_slice());
    if denominator <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let numerator = dot(&centred(s, stats), q.as_slice());
    Ok(numerator * numerator / denominator)
}

pub fn ace_score(s: &[f64], target: &[f64], stats: &BackgroundStats) -> Result<f64> {
    stats.check_len(s)?;
    stats.check_len(target)?;
    let q = stats.solve(target);
    let target_norm = dot(target, q.as_slice());
    if target_norm <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let x = centred(s, stats);
    let pixel_norm = dot(&x, stats.solve(&x).as_slice());
    if pixel_norm <= 0.0 {
        return Err(Error::DegeneratePixel);
    }
    let numerator = dot(&x, q.as_slice());
    Ok((numerator * numerator / (target_norm * pixel_norm)).min(1.0))
}

/// `(S + eps I)^{-1/2} (s - mu)`.
pub fn whiten_pixel(s: &[f64], stats: &BackgroundStats) -> Result<Vec<f64>> {
    stats.check_len(s)?;
    let x = DVector::from_vec(centred(s, stats));
    Ok((&stats.inv_sqrt * x).as_slice().to_vec())
}

/// `(S + eps I)^{-1/2} c`, with no mean subtraction.
pub fn whiten_signature(target: &Signature, stats: &BackgroundStats) -> Result<Signature> {
    stats.check_len(target.values())?;
    let x = DVector::from_column_slice(target.values());
    Signature::new((&stats.inv_sqrt * x).as_slice().to_vec())
}

/// Whitens and mean-centres every pixel of a cube.
pub fn whiten_cube(cube: &Hypercube, stats: &BackgroundStats) -> Result<Hypercube> {
    if cube.bands() != stats.bands() {
        return Err(Error::mismatch(
            format!("cube {}", cube.shape_string()),
            format!("background of {} bands", stats.bands()),
        ));
    }
    let pixels: Vec<Vec<f64>> = cube
        .pixels()
        .par_iter()
        .map(|s| whiten_pixel(s, stats))
        .collect::<Result<_>>()?;
    Hypercube::from_pixels(cube.height(), cube.width(), cube.bands(), &pixels)
}

/// Score map plus the number of pixels whose score was undefined (zero or
/// background-mean spectra) and was set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub map: DetectionMap,
    pub degenerate_pixels: usize,
}

/// Affine flip within the observed range, `x -> max + min - x`.
pub fn reverse_scores(map: &DetectionMap) -> DetectionMap {
    let (lo, hi) = map.min_max();
    map.map(|x| hi + lo - x)
}

/// Scores every pixel of `cube` against `target`. MF and ACE require
/// background statistics.
pub fn classify(
    cube: &Hypercube,
    target: &Signature,
    method: Method,
    stats: Option<&BackgroundStats>,
    reverse: bool,
) -> Result<Classification> {
    target.check_against(cube)?;
    let c = target.values();
    if dot(c, c) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let pixels = cube.pixels();
    let scores: Vec<Option<f64>> = match method {
        Method::Cos => pixels
            .par_iter()
            .map(|s| match cos_score(s, c) {
                Ok(y) => Ok(Some(y)),
                Err(Error::ZeroVector) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?,
        Method::Mf | Method::Ace => {
            let stats = stats.ok_or_else(|| {
                Error::InvalidParameter(format!("method {method} needs background statistics"))
            })?;
            if stats.bands() != cube.bands() {
                return Err(Error::mismatch(
                    format!("cube {}", cube.shape_string()),
                    format!("background of {} bands", stats.bands()),
                ));
            }
            let q = stats.solve(c);
            let target_norm = dot(c, q.as_slice());
            if target_norm <= 0.0 {
                return Err(Error::ZeroDenominator);
            }
            pixels
                .par_iter()
                .map(|s| {
                    let x = centred(s, stats);
                    let numerator = dot(&x, q.as_slice());
                    let mf = numerator * numerator / target_norm;
                    if method == Method::Mf {
                        return Some(mf);
                    }
                    let pixel_norm = dot(&x, stats.solve(&x).as_slice());
                    (pixel_norm > 0.0).then(|| (mf / pixel_norm).min(1.0))
                })
                .collect()
        }
    };
    let degenerate_pixels = scores.iter().filter(|s| s.is_none()).count();
    let data = scores.into_iter().map(|s| s.unwrap_or(0.0)).collect();
    let map = Grid::new(cube.height(), cube.width(), data)?;
    let map = if reverse { reverse_scores(&map) } else { map };
    Ok(Classification {
        map,
        degenerate_pixels,
    })
}
