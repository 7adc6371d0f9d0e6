//! Iterative Filtering (1D) and Multidimensional Iterative Filtering (2D).
//!
//! A signal is split into intrinsic mode functions plus a trend by
//! repeatedly subtracting a local moving average. Each outer round picks a
//! filter support from the extrema density of the current signal, sifts out
//! one component, and subtracts it; rounds stop once the remainder has fewer
//! than two extrema on average, the filter has reached its widest support,
//! or the component cap is reached.

mod extrema;
mod kernel;
mod sift;

pub use extrema::{compute_support_1d, compute_support_2d, count_extrema, mean_extrema_2d};
pub use kernel::{build_kernel_1d, build_kernel_2d, Kernel1d, Kernel2d};
pub use sift::{high_pass_1d, high_pass_2d, sift_1d, sift_2d, Sifted};

use crate::data::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SupportShape {
    #[default]
    Ellipsoidal,
    Spherical,
}

impl std::str::FromStr for SupportShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipsoidal" => Ok(SupportShape::Ellipsoidal),
            "spherical" => Ok(SupportShape::Spherical),
            other => Err(Error::UnparseableValue {
                key: "support".into(),
                value: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for SupportShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SupportShape::Ellipsoidal => "ellipsoidal",
            SupportShape::Spherical => "spherical",
        })
    }
}

/// How signals are continued past their ends during convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Even mirror about the end sample: `x[-j] = x[j]`.
    Symmetric,
    /// Odd mirror about the end sample: `x[-j] = 2 x[0] - x[j]`. Continues
    /// linear trends exactly.
    #[default]
    Antisymmetric,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Boundary::Symmetric),
            "antisymmetric" => Ok(Boundary::Antisymmetric),
            other => Err(Error::UnparseableValue {
                key: "boundary".into(),
                value: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Symmetric => "symmetric",
            Boundary::Antisymmetric => "antisymmetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftParams {
    /// Inner loop stops once `||s_{n+1} - s_n|| / ||s_n||` falls below this.
    pub sd_threshold: f64,
    pub max_inner_iters: usize,
    pub max_imfs: usize,
    pub support_shape: SupportShape,
    pub boundary: Boundary,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            sd_threshold: 1e-3,
            max_inner_iters: 200,
            max_imfs: 16,
            support_shape: SupportShape::Ellipsoidal,
            boundary: Boundary::Antisymmetric,
        }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_threshold > 0.0 && self.sd_threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sd threshold must be positive, got {}",
                self.sd_threshold
            )));
        }
        if self.max_inner_iters == 0 || self.max_imfs == 0 {
            return Err(Error::InvalidParameter(
                "iteration and component caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Filter support used in one outer round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Line(usize),
    Plane { rows: usize, cols: usize },
}

/// Diagnostics of one extracted component.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftRound {
    pub support: Support,
    pub inner_iterations: usize,
    /// Extrema count of the signal entering the round (row/column mean in 2D).
    pub extrema: f64,
}

/// Components in extraction order plus the trend left over.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfStack<S> {
    pub imfs: Vec<S>,
    pub residual: S,
    pub rounds: Vec<SiftRound>,
}

impl<S> ImfStack<S> {
    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }
}

impl ImfStack<Vec<f64>> {
    /// Element-wise sum of all components and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, x) in out.iter_mut().zip(imf) {
                *o += x;
            }
        }
        out
    }
}

impl ImfStack<Grid> {
    pub fn reconstruct(&self) -> Grid {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, x) in out.data_mut().iter_mut().zip(imf.data()) {
                *o += x;
            }
        }
        out
    }
}

fn max_half_length(len: usize) -> usize {
    (len / 2).max(1)
}

fn subtract_in_place(target: &mut [f64], component: &[f64]) {
    for (t, c) in target.iter_mut().zip(component) {
        *t -= c;
    }
}

/// Iterative Filtering of a 1D signal. Rounds continue while the residual
/// has at least two extrema, and end after the first round whose filter
/// already spans half the signal.
pub fn if_decompose_1d(signal: &[f64], params: &SiftParams) -> Result<ImfStack<Vec<f64>>> {
    params.validate()?;
    if let Some(i) = signal.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue(i));
    }
    let mut residual = signal.to_vec();
    let mut imfs = Vec::new();
    let mut rounds = Vec::new();
    while imfs.len() < params.max_imfs {
        let extrema = count_extrema(&residual);
        if extrema < 2 {
            break;
        }
        let half_length = compute_support_1d(&residual)?;
        let kernel = build_kernel_1d(half_length);
        let sifted = sift_1d(&residual, &kernel, params);
        // A degenerate (identity) filter extracts nothing; stop rather than
        // emit empty components.
        if sifted.component.iter().all(|&x| x == 0.0) {
            break;
        }
        subtract_in_place(&mut residual, &sifted.component);
        imfs.push(sifted.component);
        rounds.push(SiftRound {
            support: Support::Line(half_length),
            inner_iterations: sifted.iterations,
            extrema: extrema as f64,
        });
        // The filter cannot widen any further; another round would reuse it.
        if half_length >= max_half_length(residual.len()) {
            break;
        }
    }
    Ok(ImfStack {
        imfs,
        residual,
        rounds,
    })
}

/// Multidimensional Iterative Filtering of an image. Rounds continue while
/// either the mean row or the mean column extrema count is at least two,
/// and end once the filter spans half the image in both directions.
pub fn mif_decompose_2d(image: &Grid, params: &SiftParams) -> Result<ImfStack<Grid>> {
    params.validate()?;
    let mut residual = image.clone();
    let mut imfs = Vec::new();
    let mut rounds = Vec::new();
    while imfs.len() < params.max_imfs {
        let (along_rows, along_cols) = mean_extrema_2d(&residual);
        if along_rows < 2.0 && along_cols < 2.0 {
            break;
        }
        let (half_rows, half_cols) = match compute_support_2d(&residual, params.support_shape) {
            Ok(s) => s,
            Err(Error::NoExtremaAnywhere) => break,
            Err(e) => return Err(e),
        };
        let kernel = build_kernel_2d(half_rows, half_cols);
        let sifted = sift_2d(&residual, &kernel, params);
        if sifted.component.data().iter().all(|&x| x == 0.0) {
            break;
        }
        subtract_in_place(residual.data_mut(), sifted.component.data());
        imfs.push(sifted.component);
        rounds.push(SiftRound {
            support: Support::Plane {
                rows: half_rows,
                cols: half_cols,
            },
            inner_iterations: sifted.iterations,
            extrema: 0.5 * (along_rows + along_cols),
        });
        if half_rows >= max_half_length(image.rows()) && half_cols >= max_half_length(image.cols()) {
            break;
        }
    }
    Ok(ImfStack {
        imfs,
        residual,
        rounds,
    })
}
