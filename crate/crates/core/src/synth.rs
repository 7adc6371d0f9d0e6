//! Reproducible synthetic scenes: a spectrally correlated Gaussian
//! background with an elliptical plume whose pixels have the chemical
//! signature subtracted, `s <- s - alpha * m * s_c`.
//!
//! Randomness is counter based (splitmix64 mixing, Box-Muller), so every
//! sample is a pure function of the seed and its position.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;

use crate::config::KeyValues;
use crate::data::{GroundTruthMask, Hypercube, Label, Signature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub seed: u64,
    /// Implant strength; negative values add the signature instead.
    pub alpha: f64,
    pub center_row: f64,
    pub center_col: f64,
    pub radius_row: f64,
    pub radius_col: f64,
    /// Width in pixels over which membership falls from 1 to 0; 0 gives a
    /// hard edge.
    pub edge_width: f64,
    /// Pixels outside the plume within this distance are labelled boundary.
    pub boundary_width: f64,
    pub background_level: f64,
    /// Relative linear slope of the mean spectrum across the bands.
    pub background_tilt: f64,
    /// Moving-average half-widths of the noise field.
    pub spatial_corr: usize,
    pub spectral_corr: usize,
    pub noise_sigma: f64,
}

impl SceneSpec {
    /// Scene with every optional field at its default for the given size.
    pub fn new(height: usize, width: usize, bands: usize, seed: u64, alpha: f64) -> Self {
        Self {
            height,
            width,
            bands,
            seed,
            alpha,
            center_row: (height as f64 - 1.0) / 2.0,
            center_col: (width as f64 - 1.0) / 2.0,
            radius_row: height as f64 / 5.0,
            radius_col: width as f64 / 5.0,
            edge_width: 2.0,
            boundary_width: 1.0,
            background_level: 2.0,
            background_tilt: 0.5,
            spatial_corr: 0,
            spectral_corr: 2,
            noise_sigma: 0.6,
        }
    }

    /// The 64 x 64 x 40 benchmark scene.
    pub fn benchmark(seed: u64, alpha: f64) -> Self {
        Self::new(64, 64, 40, seed, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return bad("scene dimensions must be positive");
        }
        let limit = self.height.min(self.width) as f64 / 2.0;
        if !(self.radius_row > 0.0 && self.radius_col > 0.0 && self.radius_row < limit && self.radius_col < limit) {
            return bad("plume radii must be positive and below min(h, v)/2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(self.edge_width >= 0.0 && self.boundary_width >= 0.0) {
            return bad("edge_width and boundary_width must be non-negative");
        }
        let finite = [
            self.alpha,
            self.center_row,
            self.center_col,
            self.edge_width,
            self.boundary_width,
            self.background_level,
            self.background_tilt,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("scene parameters must be finite");
        }
        Ok(())
    }

    /// Soft plume membership in `[0, 1]` and approximate signed distance
    /// (pixels, negative inside) to the ellipse.
    pub fn membership(&self, row: usize, col: usize) -> (f64, f64) {
        let u = (row as f64 - self.center_row) / self.radius_row;
        let w = (col as f64 - self.center_col) / self.radius_col;
        let rho = (u * u + w * w).sqrt();
        let distance = (rho - 1.0) * self.radius_row.min(self.radius_col);
        let m = if self.edge_width == 0.0 {
            if rho <= 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (0.5 - distance / self.edge_width).clamp(0.0, 1.0)
        };
        (m, distance)
    }

    /// Background mean spectrum.
    pub fn mean_profile(&self) -> Vec<f64> {
        let d = self.bands;
        (0..d)
            .map(|b| {
                let t = if d > 1 { b as f64 / (d - 1) as f64 } else { 0.5 };
                self.background_level * (1.0 + self.background_tilt * (t - 0.5))
            })
            .collect()
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in the open interval (0, 1) at position `counter` of stream `key`.
fn uniform(key: u64, counter: u64) -> f64 {
    let bits = splitmix64(key.wrapping_add(counter.wrapping_mul(GOLDEN))) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal at position `k` of stream `key`.
pub fn normal(key: u64, k: u64) -> f64 {
    let u1 = uniform(key, 2 * k);
    let u2 = uniform(key, 2 * k + 1);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Sliding sums of width `2 * half + 1` along a slice of length
/// `out_len + 2 * half`.
fn box_sums(x: &[f64], half: usize, out_len: usize) -> Vec<f64> {
    let width = 2 * half + 1;
    (0..out_len).map(|i| x[i..i + width].iter().sum()).collect()
}

/// Unit-variance Gaussian field of shape bands x height x width,
/// correlated by separable moving averages. Band-sequential layout.
pub fn correlated_field(key: u64, bands: usize, height: usize, width: usize, spatial: usize, spectral: usize) -> Vec<f64> {
    let (eh, ew) = (height + 2 * spatial, width + 2 * spatial);
    let eb = bands + 2 * spectral;
    let scale = 1.0 / (((2 * spectral + 1) * (2 * spatial + 1) * (2 * spatial + 1)) as f64).sqrt();
    let planes: Vec<Vec<f64>> = (0..bands)
        .into_par_iter()
        .map(|b| {
            let mut plane = vec![0.0; eh * ew];
            for eb_index in b..b + 2 * spectral + 1 {
                debug_assert!(eb_index < eb);
                let base = (eb_index * eh * ew) as u64;
                for (i, x) in plane.iter_mut().enumerate() {
                    *x += normal(key, base + i as u64);
                }
            }
            let rows: Vec<Vec<f64>> = plane.chunks(ew).map(|r| box_sums(r, spatial, width)).collect();
            let mut out = vec![0.0; height * width];
            let mut column = vec![0.0; eh];
            for c in 0..width {
                for (r, x) in column.iter_mut().enumerate() {
                    *x = rows[r][c];
                }
                for (r, s) in box_sums(&column, spatial, height).into_iter().enumerate() {
                    out[r * width + c] = s * scale;
                }
            }
            out
        })
        .collect();
    planes.concat()
}

/// A positive absorption-style signature with a handful of Gaussian lines.
pub fn default_signature(bands: usize) -> Signature {
    let lines = [(0.12, 1.0), (0.3, 0.6), (0.47, 0.9), (0.63, 0.5), (0.8, 0.8), (0.92, 0.4)];
    let span = bands.saturating_sub(1).max(1) as f64;
    let width = (1.2 * bands as f64 / 40.0).max(0.8);
    let values = (0..bands)
        .map(|b| {
            lines
                .iter()
                .map(|&(at, height)| {
                    let z = (b as f64 - at * span) / width;
                    height * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                + 0.05
        })
        .collect();
    Signature::new(values).expect("default signature is finite")
}

/// Generates the cube and its ground-truth mask.
pub fn generate(spec: &SceneSpec, target: &Signature) -> Result<(Hypercube, GroundTruthMask)> {
    spec.validate()?;
    if target.len() != spec.bands {
        return Err(Error::mismatch(
            format!("scene of {} bands", spec.bands),
            format!("signature of length {}", target.len()),
        ));
    }
    let (h, v, d) = (spec.height, spec.width, spec.bands);
    let n = h * v;
    let key = splitmix64(spec.seed);
    let mut data = if spec.noise_sigma > 0.0 {
        correlated_field(key, d, h, v, spec.spatial_corr, spec.spectral_corr)
    } else {
        vec![0.0; d * n]
    };
    let profile = spec.mean_profile();
    let mut membership = vec![0.0; n];
    let mut labels = Vec::with_capacity(n);
    for r in 0..h {
        for c in 0..v {
            let (m, distance) = spec.membership(r, c);
            membership[r * v + c] = m;
            labels.push(if m >= 0.5 {
                Label::Plume
            } else if m > 0.0 || distance <= spec.boundary_width {
                Label::Boundary
            } else {
                Label::Background
            });
        }
    }
    for (b, plane) in data.chunks_mut(n).enumerate() {
        let (mu, sc) = (profile[b], target.values()[b]);
        for (x, &m) in plane.iter_mut().zip(&membership) {
            *x = mu + spec.noise_sigma * *x - spec.alpha * m * sc;
        }
    }
    Ok((Hypercube::new(h, v, d, data)?, GroundTruthMask::new(h, v, labels)?))
}

/// Reads a scene spec. `h`, `v`, `d`, `seed` and `alpha` are required;
/// every other field may be given by its name.
pub fn spec_from_file(path: &Path) -> Result<SceneSpec> {
    spec_from_key_values(KeyValues::read(path)?)
}

pub fn spec_from_str(text: &str) -> Result<SceneSpec> {
    spec_from_key_values(KeyValues::parse(text)?)
}

fn spec_from_key_values(mut kv: KeyValues) -> Result<SceneSpec> {
    let mut spec = SceneSpec::new(
        kv.require("h")?,
        kv.require("v")?,
        kv.require("d")?,
        kv.require("seed")?,
        kv.require("alpha")?,
    );
    macro_rules! optional {
        ($($field:ident),*) => {
            $(if let Some(x) = kv.take(stringify!($field))? { spec.$field = x; })*
        };
    }
    optional!(
        center_row,
        center_col,
        radius_row,
        radius_col,
        edge_width,
        boundary_width,
        background_level,
        background_tilt,
        spatial_corr,
        spectral_corr,
        noise_sigma
    );
    kv.finish()?;
    spec.validate()?;
    Ok(spec)
}

/// Key-value text that [`spec_from_str`] reads back to the same spec.
pub fn spec_to_string(spec: &SceneSpec) -> String {
    format!(
        "h = {}\nv = {}\nd = {}\nseed = {}\nalpha = {:e}\ncenter_row = {:e}\ncenter_col = {:e}\n\
         radius_row = {:e}\nradius_col = {:e}\nedge_width = {:e}\nboundary_width = {:e}\n\
         background_level = {:e}\nbackground_tilt = {:e}\nspatial_corr = {}\nspectral_corr = {}\n\
         noise_sigma = {:e}\n",
        spec.height,
        spec.width,
        spec.bands,
        spec.seed,
        spec.alpha,
        spec.center_row,
        spec.center_col,
        spec.radius_row,
        spec.radius_col,
        spec.edge_width,
        spec.boundary_width,
        spec.background_level,
        spec.background_tilt,
        spec.spatial_corr,
        spec.spectral_corr,
        spec.noise_sigma
    )
}
