//! Extrema counting and adaptive filter support selection.

use crate::data::Grid;
use crate::error::{Error, Result};

use super::SupportShape;

/// Number of strict interior local maxima plus minima. A plateau counts
/// once when both neighbouring runs lie on the same side of it; runs that
/// touch either end of the signal never count.
pub fn count_extrema(signal: &[f64]) -> usize {
    // Collapse equal neighbours into runs, keeping one value per run.
    let mut runs: Vec<f64> = Vec::with_capacity(signal.len());
    for &x in signal {
        if runs.last() != Some(&x) {
            runs.push(x);
        }
    }
    runs.windows(3)
        .filter(|w| (w[1] > w[0] && w[1] > w[2]) || (w[1] < w[0] && w[1] < w[2]))
        .count()
}

fn support_from_ratio(ratio: f64, len: usize) -> usize {
    let upper = (len / 2).max(1);
    (ratio.round() as usize).clamp(1, upper)
}

/// Filter half-length for a 1D signal: `round(4N / K)` clamped to
/// `[1, N / 2]`, where `K` is the extrema count.
pub fn compute_support_1d(signal: &[f64]) -> Result<usize> {
    let k = count_extrema(signal);
    if k < 2 {
        return Err(Error::TooFewExtrema);
    }
    let n = signal.len();
    Ok(support_from_ratio(4.0 * n as f64 / k as f64, n))
}

/// Mean of `4 * len / K` over the lines with at least two extrema.
fn mean_line_support<'a>(lines: impl Iterator<Item = Vec<f64>> + 'a) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for line in lines {
        let k = count_extrema(&line);
        if k >= 2 {
            sum += 4.0 * line.len() as f64 / k as f64;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Half-lengths `(rows, cols)` of the elliptical support of a 2D signal.
///
/// The column half-length comes from the rows and the row half-length from
/// the columns. A direction in which no line has two extrema gets the
/// largest allowed support.
pub fn compute_support_2d(image: &Grid, shape: SupportShape) -> Result<(usize, usize)> {
    let (h, v) = (image.rows(), image.cols());
    let along_rows = mean_line_support((0..h).map(|r| image.row(r).to_vec()));
    let along_cols = mean_line_support((0..v).map(|c| image.column(c)));
    if along_rows.is_none() && along_cols.is_none() {
        return Err(Error::NoExtremaAnywhere);
    }
    let mut half_cols = along_rows.map_or((v / 2).max(1), |m| support_from_ratio(m, v));
    let mut half_rows = along_cols.map_or((h / 2).max(1), |m| support_from_ratio(m, h));
    if shape == SupportShape::Spherical {
        let radius = ((half_rows * half_cols) as f64).sqrt();
        half_rows = support_from_ratio(radius, h);
        half_cols = support_from_ratio(radius, v);
    }
    Ok((half_rows, half_cols))
}

/// Average extrema count over rows and over columns.
pub fn mean_extrema_2d(image: &Grid) -> (f64, f64) {
    let rows = (0..image.rows())
        .map(|r| count_extrema(image.row(r)))
        .sum::<usize>() as f64
        / image.rows() as f64;
    let cols = (0..image.cols())
        .map(|c| count_extrema(&image.column(c)))
        .sum::<usize>() as f64
        / image.cols() as f64;
    (rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Reference count: scan every index and look outward past equal values.
    fn brute_force_extrema(x: &[f64]) -> usize {
        let n = x.len();
        let mut count = 0;
        let mut i = 1;
        while i + 1 < n {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[i - 1] != x[i] {
                let (left, right) = (x[i - 1], x[j + 1]);
                if (left < x[i] && right < x[i]) || (left > x[i] && right > x[i]) {
                    count += 1;
                }
            }
            i = j + 1;
        }
        count
    }

    #[test]
    fn simple_counts() {
        assert_eq!(count_extrema(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(count_extrema(&[1.0, 2.0, 3.0, 4.0]), 0);
        assert_eq!(count_extrema(&[5.0]), 0);
        assert_eq!(count_extrema(&[0.0, 1.0, 1.0, 1.0, 0.0]), 1);
        // plateau that continues upward is not an extremum
        assert_eq!(count_extrema(&[0.0, 1.0, 1.0, 2.0]), 0);
        // endpoint plateau never counts
        assert_eq!(count_extrema(&[3.0, 3.0, 1.0, 2.0]), 1);
    }

    #[test]
    fn sine_with_three_periods_has_six_extrema() {
        let n = 300;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 3.0 * i as f64 / n as f64).sin()).collect();
        assert_eq!(brute_force_extrema(&x), 6);
        assert_eq!(count_extrema(&x), 6);
    }

    #[test]
    fn agrees_with_brute_force_on_quantised_noise() {
        let mut state = 12345u64;
        for _ in 0..200 {
            let x: Vec<f64> = (0..40)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 60) % 4) as f64
                })
                .collect();
            assert_eq!(count_extrema(&x), brute_force_extrema(&x), "{x:?}");
        }
    }

    #[test]
    fn support_rule() {
        // two extrema over 100 samples: 4N/K = 200, clamped to N/2
        let mut x = vec![0.0; 100];
        x[30] = 1.0;
        x[60] = -1.0;
        assert_eq!(count_extrema(&x), 2);
        assert_eq!(compute_support_1d(&x).unwrap(), 50);

        // 20 extrema over 1000 samples: 4N/K = 200
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * 10.0 * (i as f64 + 0.5) / 1000.0).sin()).collect();
        assert_eq!(count_extrema(&x), 20);
        assert_eq!(compute_support_1d(&x).unwrap(), 200);

        assert!(matches!(compute_support_1d(&[1.0; 10]), Err(Error::TooFewExtrema)));
    }

    #[test]
    fn support_2d_uses_rows_for_columns() {
        // every row: 5 periods of a sine over 64 samples -> 10 extrema;
        // every column constant.
        let (h, v) = (16, 64);
        let img = Grid::from_fn(h, v, |_, c| (2.0 * PI * 5.0 * (c as f64 + 0.5) / v as f64).sin());
        assert_eq!(count_extrema(img.row(0)), 10);
        let (lr, lc) = compute_support_2d(&img, SupportShape::Ellipsoidal).unwrap();
        // 4 * 64 / 10 = 25.6 -> 26; columns carry no extrema -> h / 2
        assert_eq!(lc, 26);
        assert_eq!(lr, 8);

        let (tr, tc) = compute_support_2d(&img.transpose(), SupportShape::Ellipsoidal).unwrap();
        assert_eq!((tr, tc), (lc, lr));
    }

    #[test]
    fn constant_image_has_no_support() {
        let img = Grid::from_fn(8, 8, |_, _| 2.0);
        assert!(matches!(
            compute_support_2d(&img, SupportShape::Ellipsoidal),
            Err(Error::NoExtremaAnywhere)
        ));
    }

    #[test]
    fn spherical_support_uses_geometric_mean() {
        let img = Grid::from_fn(64, 64, |r, c| {
            (2.0 * PI * 4.0 * (c as f64 + 0.5) / 64.0).sin() + (2.0 * PI * 16.0 * (r as f64 + 0.5) / 64.0).sin()
        });
        let (lr, lc) = compute_support_2d(&img, SupportShape::Ellipsoidal).unwrap();
        let (sr, sc) = compute_support_2d(&img, SupportShape::Spherical).unwrap();
        assert_eq!(sr, sc);
        let expected = ((lr * lc) as f64).sqrt().round() as usize;
        assert_eq!(sr, expected);
    }
}
