//! In-memory containers for cubes, spectra, score maps and ground truth.

use crate::error::{Error, Result};

/// A hyperspectral cube with `height` rows, `width` columns and `bands`
/// spectral channels, stored band-sequentially (`[band][row][col]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypercube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl Hypercube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::InvalidParameter(format!(
                "hypercube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if data.len() != expected {
            return Err(Error::TruncatedData {
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    /// Builds a cube from pixel spectra given in row-major pixel order.
    pub fn from_pixels(height: usize, width: usize, bands: usize, pixels: &[Vec<f64>]) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::mismatch(
                format!("{} pixels", pixels.len()),
                format!("{height}x{width} image"),
            ));
        }
        let plane = height * width;
        let mut data = vec![0.0; plane * bands];
        for (p, spectrum) in pixels.iter().enumerate() {
            if spectrum.len() != bands {
                return Err(Error::mismatch(
                    format!("spectrum of length {}", spectrum.len()),
                    format!("{bands} bands"),
                ));
            }
            for (b, &x) in spectrum.iter().enumerate() {
                data[b * plane + p] = x;
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Raw band-sequential payload.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// Spectrum of the pixel at flat row-major index `p`.
    pub fn pixel(&self, p: usize) -> Vec<f64> {
        let plane = self.pixel_count();
        (0..self.bands).map(|b| self.data[b * plane + p]).collect()
    }

    /// All spectra in row-major pixel order.
    pub fn pixels(&self) -> Vec<Vec<f64>> {
        let plane = self.pixel_count();
        let mut out = vec![Vec::with_capacity(self.bands); plane];
        for band in self.data.chunks_exact(plane) {
            for (spectrum, &x) in out.iter_mut().zip(band) {
                spectrum.push(x);
            }
        }
        out
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let plane = self.pixel_count();
        &self.data[b * plane..(b + 1) * plane]
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.bands)
    }
}

/// A spectral signature, one value per band.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature(Vec<f64>);

impl Signature {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyFile);
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_against(&self, cube: &Hypercube) -> Result<()> {
        if self.len() != cube.bands() {
            return Err(Error::mismatch(
                format!("signature of {} bands", self.len()),
                format!("cube {}", cube.shape_string()),
            ));
        }
        Ok(())
    }
}

/// Dense row-major real matrix. Used for detection maps and as the 2D
/// signal type of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Per-pixel classifier scores.
pub type DetectionMap = Grid;

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::TruncatedData {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, x: f64) {
        self.data[r * self.cols + c] = x;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

/// Ground-truth class of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    Background = 0,
    Plume = 1,
    /// Ambiguous pixels near the plume edge; excluded from ROC statistics.
    Boundary = 2,
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Background),
            1 => Ok(Label::Plume),
            2 => Ok(Label::Boundary),
            other => Err(Error::IllegalLabel(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    rows: usize,
    cols: usize,
    labels: Vec<Label>,
}

impl GroundTruthMask {
    pub fn new(rows: usize, cols: usize, labels: Vec<Label>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::TruncatedData {
                expected: rows * cols,
                found: labels.len(),
            });
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, r: usize, c: usize) -> Label {
        self.labels[r * self.cols + c]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn with_label(&self, p: usize, label: Label) -> Self {
        let mut out = self.clone();
        out.labels[p] = label;
        out
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn check_against_grid(&self, grid: &Grid) -> Result<()> {
        if self.rows != grid.rows() || self.cols != grid.cols() {
            return Err(Error::mismatch(
                format!("mask {}", self.shape_string()),
                format!("map {}", grid.shape_string()),
            ));
        }
        Ok(())
    }

    pub fn check_against_cube(&self, cube: &Hypercube) -> Result<()> {
        if self.rows != cube.height() || self.cols != cube.width() {
            return Err(Error::mismatch(
                format!("mask {}", self.shape_string()),
                format!("cube {}", cube.shape_string()),
            ));
        }
        Ok(())
    }
}
