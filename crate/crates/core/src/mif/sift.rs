//! The inner sifting iteration `s <- s - (s * w)` with the relative-change
//! stopping rule, in one and two dimensions.
//!
//! Convolutions extend the signal past its ends by mirroring (see
//! [`Boundary`]) and are evaluated as
//! `sum_{k>0} w_k ((2 s_i - s_{i+k}) - s_{i-k})`, using the kernel's point
//! symmetry. Every term is exactly zero on constant data, whatever the
//! rounding in the kernel weights.

use rayon::prelude::*;

use super::kernel::{Kernel1d, Kernel2d};
use super::{Boundary, SiftParams};
use crate::data::Grid;

/// Result of one inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Sifted<S> {
    pub component: S,
    pub iterations: usize,
    /// Relative change of the last update, `None` if no update was made.
    pub last_sd: Option<f64>,
}

/// Index into `[0, n)` of position `j` under whole-sample mirror extension.
#[inline]
pub(crate) fn reflect(j: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = j.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Value at position `j` of `x` extended past both ends.
pub(crate) fn extended(x: &[f64], j: isize, boundary: Boundary) -> f64 {
    let n = x.len();
    match boundary {
        Boundary::Symmetric => x[reflect(j, n)],
        Boundary::Antisymmetric => {
            if n == 1 {
                return x[0];
            }
            let last = n as isize - 1;
            if j < 0 {
                2.0 * x[0] - extended(x, -j, boundary)
            } else if j > last {
                2.0 * x[last as usize] - extended(x, 2 * last - j, boundary)
            } else {
                x[j as usize]
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Generic inner loop: `step` maps the current iterate to the next one.
fn iterate(mut current: Vec<f64>, params: &SiftParams, mut step: impl FnMut(&[f64]) -> Vec<f64>) -> (Vec<f64>, usize, Option<f64>) {
    let mut iterations = 0;
    let mut last_sd = None;
    while iterations < params.max_inner_iters {
        let size = norm(&current);
        if size == 0.0 {
            break;
        }
        let next = step(&current);
        let sd = distance(&next, &current) / size;
        current = next;
        iterations += 1;
        last_sd = Some(sd);
        if sd < params.sd_threshold {
            break;
        }
    }
    (current, iterations, last_sd)
}

const LANES: usize = 8;

/// `sum_j w_j ((2 centre - a_j) - b_j)` over equal-length slices, where `a`
/// and `b` hold the samples at mirrored offsets `+k` and `-k`. The pairing
/// uses the kernel's point symmetry; each term is exactly zero on constant
/// data. Independent lanes let the loop vectorise, and their fixed order
/// keeps the result independent of the thread count.
#[inline]
fn paired_differences(centre: f64, weights: &[f64], a: &[f64], b: &[f64], lanes: &mut [f64; LANES]) {
    let twice = 2.0 * centre;
    let n = weights.len();
    let (weights, a, b) = (&weights[..n], &a[..n], &b[..n]);
    let split = n - n % LANES;
    for s in (0..split).step_by(LANES) {
        for j in 0..LANES {
            lanes[j] += weights[s + j] * ((twice - a[s + j]) - b[s + j]);
        }
    }
    for j in split..n {
        lanes[j - split] += weights[j] * ((twice - a[j]) - b[j]);
    }
}

fn lane_total(lanes: &[f64; LANES]) -> f64 {
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
}

/// One application of `s - (s * w)` on a 1D signal.
pub fn high_pass_1d(signal: &[f64], kernel: &Kernel1d, boundary: Boundary) -> Vec<f64> {
    let n = signal.len();
    let l = kernel.half_length();
    // Weights at offsets 1..=l; the centre tap contributes nothing.
    let weights = &kernel.weights()[l + 1..];
    let padded: Vec<f64> = (-(l as isize)..(n + l) as isize).map(|j| extended(signal, j, boundary)).collect();
    let reversed: Vec<f64> = padded.iter().rev().copied().collect();
    let last = padded.len() - 1;
    (0..n)
        .map(|i| {
            // Sample i sits at padded[i + l]; offset -k reads reversed[last - i - l + k].
            let mut lanes = [0.0; LANES];
            let ahead = &padded[i + l + 1..];
            let behind = &reversed[last - i - l + 1..];
            paired_differences(signal[i], weights, ahead, behind, &mut lanes);
            lane_total(&lanes)
        })
        .collect()
}

/// Contiguous stretch of non-zero kernel weights starting at offset
/// `(dr, dc)` from the centre. Only the half of the kernel that comes
/// after the centre in row-major order is kept; the other half mirrors it.
struct Run {
    dr: usize,
    dc: isize,
    weights: Vec<f64>,
}

fn half_kernel_runs(kernel: &Kernel2d) -> Vec<Run> {
    let (lr, lc) = kernel.half_lengths();
    let width = kernel.width();
    let mut runs = Vec::new();
    for (i, row) in kernel.weights().chunks(width).enumerate().skip(lr) {
        let from = if i == lr { lc + 1 } else { 0 };
        let row = &row[from..];
        let (Some(first), Some(last)) = (row.iter().position(|&w| w != 0.0), row.iter().rposition(|&w| w != 0.0)) else {
            continue;
        };
        runs.push(Run {
            dr: i - lr,
            dc: (from + first) as isize - lc as isize,
            weights: row[first..=last].to_vec(),
        });
    }
    runs
}

/// One application of `s - (s * w)` on an image, evaluated row-parallel by
/// direct summation over the elliptical support.
pub fn high_pass_2d(image: &Grid, kernel: &Kernel2d, boundary: Boundary) -> Grid {
    let (h, v) = (image.rows(), image.cols());
    let (lr, lc) = kernel.half_lengths();
    let pw = v + 2 * lc;
    let ph = h + 2 * lr;
    // Extend each row, then each column of the row-extended array.
    let wide: Vec<Vec<f64>> = (0..h)
        .map(|r| {
            let row = image.row(r);
            (0..pw).map(|pc| extended(row, pc as isize - lc as isize, boundary)).collect()
        })
        .collect();
    let mut padded = vec![0.0; ph * pw];
    let mut column = vec![0.0; h];
    for pc in 0..pw {
        for (r, x) in column.iter_mut().enumerate() {
            *x = wide[r][pc];
        }
        for pr in 0..ph {
            padded[pr * pw + pc] = extended(&column, pr as isize - lr as isize, boundary);
        }
    }
    let reversed: Vec<f64> = padded.iter().rev().copied().collect();
    let last = padded.len() - 1;
    let runs = half_kernel_runs(kernel);
    let mut out = vec![0.0; h * v];
    out.par_chunks_mut(v).enumerate().for_each(|(r, out_row)| {
        for (c, o) in out_row.iter_mut().enumerate() {
            let base = (r + lr) * pw + c + lc;
            let mirror = last - base;
            let mut lanes = [0.0; LANES];
            for run in &runs {
                let offset = (run.dr * pw) as isize + run.dc;
                let ahead = &padded[(base as isize + offset) as usize..];
                let behind = &reversed[(mirror as isize + offset) as usize..];
                paired_differences(image.get(r, c), &run.weights, ahead, behind, &mut lanes);
            }
            *o = lane_total(&lanes);
        }
    });
    Grid::from_raw(h, v, out)
}

/// Sifts a 1D signal until the relative change drops below the threshold
/// or the iteration cap is hit. A zero iterate is returned as is.
pub fn sift_1d(signal: &[f64], kernel: &Kernel1d, params: &SiftParams) -> Sifted<Vec<f64>> {
    let (component, iterations, last_sd) = iterate(signal.to_vec(), params, |s| high_pass_1d(s, kernel, params.boundary));
    Sifted {
        component,
        iterations,
        last_sd,
    }
}

pub fn sift_2d(image: &Grid, kernel: &Kernel2d, params: &SiftParams) -> Sifted<Grid> {
    let (h, v) = (image.rows(), image.cols());
    let (data, iterations, last_sd) = iterate(image.data().to_vec(), params, |s| {
        high_pass_2d(&Grid::from_raw(h, v, s.to_vec()), kernel, params.boundary).into_data()
    });
    Sifted {
        component: Grid::from_raw(h, v, data),
        iterations,
        last_sd,
    }
}
