//! Compactly supported low-pass kernels used by the sifting step.

/// Symmetric 1D kernel with `2 * half_length + 1` taps, centred at index
/// `half_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1d {
    half_length: usize,
    weights: Vec<f64>,
}

impl Kernel1d {
    pub fn half_length(&self) -> usize {
        self.half_length
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at signed offset `k`, zero outside the support.
    pub fn at(&self, k: isize) -> f64 {
        let l = self.half_length as isize;
        if k.abs() > l {
            0.0
        } else {
            self.weights[(k + l) as usize]
        }
    }
}

/// 2D kernel on an elliptical support, stored row-major over the
/// `(2 * half_rows + 1) x (2 * half_cols + 1)` bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    half_rows: usize,
    half_cols: usize,
    weights: Vec<f64>,
}

impl Kernel2d {
    pub fn half_lengths(&self) -> (usize, usize) {
        (self.half_rows, self.half_cols)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn width(&self) -> usize {
        2 * self.half_cols + 1
    }

    pub fn at(&self, dr: isize, dc: isize) -> f64 {
        let (lr, lc) = (self.half_rows as isize, self.half_cols as isize);
        if dr.abs() > lr || dc.abs() > lc {
            return 0.0;
        }
        self.weights[((dr + lr) as usize) * self.width() + (dc + lc) as usize]
    }

    /// Non-zero taps as `(row offset, col offset, weight)`.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let (lr, lc) = (self.half_rows as isize, self.half_cols as isize);
        let mut taps = Vec::new();
        for dr in -lr..=lr {
            for dc in -lc..=lc {
                let w = self.at(dr, dc);
                if w != 0.0 {
                    taps.push((dr, dc, w));
                }
            }
        }
        taps
    }
}

/// Samples of the triangle `max(0, 1 - |j| / (l/2))` at integer `j >= 0`.
fn triangle_half(half_length: usize) -> Vec<f64> {
    let radius = half_length as f64 / 2.0;
    (0..=half_length / 2)
        .map(|j| (1.0 - j as f64 / radius).max(0.0))
        .collect()
}

/// Self-convolution of the discrete triangle on `[-l/2, l/2]`, padded to
/// `[-l, l]` and normalised to unit sum. Endpoints are always zero; `l = 1`
/// and `l = 2` degenerate to the identity tap.
pub fn build_kernel_1d(half_length: usize) -> Kernel1d {
    assert!(half_length >= 1, "kernel half-length must be at least 1");
    let tri = triangle_half(half_length);
    let t = |j: isize| -> f64 { tri.get(j.unsigned_abs()).copied().unwrap_or(0.0) };
    let l = half_length as isize;
    let reach = tri.len() as isize - 1;

    // Only non-negative offsets are summed; the negative side is mirrored so
    // the kernel is exactly symmetric.
    let positive: Vec<f64> = (0..=l)
        .map(|k| (-reach..=reach).map(|j| t(j) * t(k - j)).sum())
        .collect();
    let total = positive[0] + 2.0 * positive[1..].iter().sum::<f64>();
    let mut weights = vec![0.0; 2 * half_length + 1];
    for (k, &w) in positive.iter().enumerate() {
        let w = w / total;
        weights[half_length + k] = w;
        weights[half_length - k] = w;
    }
    Kernel1d {
        half_length,
        weights,
    }
}

/// Outer product of two 1D kernels, zeroed outside the ellipse
/// `(r / l_r)^2 + (c / l_c)^2 <= 1` and renormalised.
pub fn build_kernel_2d(half_rows: usize, half_cols: usize) -> Kernel2d {
    let kr = build_kernel_1d(half_rows);
    let kc = build_kernel_1d(half_cols);
    let (lr, lc) = (half_rows as isize, half_cols as isize);
    let width = 2 * half_cols + 1;
    let mut weights = vec![0.0; (2 * half_rows + 1) * width];
    let mut total = 0.0;
    for dr in -lr..=lr {
        for dc in -lc..=lc {
            let (u, v) = (dr as f64 / lr as f64, dc as f64 / lc as f64);
            if u * u + v * v <= 1.0 {
                let w = kr.at(dr) * kc.at(dc);
                weights[((dr + lr) as usize) * width + (dc + lc) as usize] = w;
                total += w;
            }
        }
    }
    for w in &mut weights {
        *w /= total;
    }
    Kernel2d {
        half_rows,
        half_cols,
        weights,
    }
}
