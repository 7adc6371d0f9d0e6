#![allow(dead_code)]

use plumekit::{DetectionMap, Grid, GroundTruthMask, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, kept local so the oracle shares no code with the crate.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Labels and scores as a one-row map and mask.
pub fn instance(scores: &[f64], labels: &[Label]) -> (DetectionMap, GroundTruthMask) {
    let n = scores.len();
    (
        Grid::new(1, n, scores.to_vec()).unwrap(),
        GroundTruthMask::new(1, n, labels.to_vec()).unwrap(),
    )
}

fn counts_at(scores: &[f64], labels: &[Label], tau: f64) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut p, mut n) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match l {
            Label::Plume => {
                p += 1;
                if s >= tau {
                    tp += 1;
                }
            }
            Label::Background => {
                n += 1;
                if s >= tau {
                    fp += 1;
                }
            }
            Label::Boundary => {}
        }
    }
    (tp, fp, p, n)
}

fn trapezoid(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// `(fpr, tpr)` at "everything negative" and then at every distinct score,
/// counted pixel by pixel.
pub fn unique_threshold_points(scores: &[f64], labels: &[Label]) -> Vec<(f64, f64)> {
    let mut taus: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l != Label::Boundary)
        .map(|(&s, _)| s)
        .collect();
    taus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    taus.dedup();
    let (_, _, p, n) = counts_at(scores, labels, f64::INFINITY);
    let mut pts = vec![(0.0, 0.0)];
    for tau in taus {
        let (tp, fp, _, _) = counts_at(scores, labels, tau);
        pts.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    pts
}

pub fn unique_threshold_auc(scores: &[f64], labels: &[Label]) -> f64 {
    trapezoid(unique_threshold_points(scores, labels))
}

/// Sweeps `steps` evenly spaced thresholds from the lowest to the highest
/// evaluated score, plus one above the highest.
pub fn grid_oracle_auc(scores: &[f64], labels: &[Label], steps: usize) -> f64 {
    let evaluated: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l != Label::Boundary)
        .map(|(&s, _)| s)
        .collect();
    let lo = evaluated.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = evaluated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pts = vec![(0.0, 0.0)];
    for j in 0..steps {
        let tau = if j + 1 == steps { hi } else { lo + (hi - lo) * j as f64 / (steps - 1) as f64 };
        let (tp, fp, p, n) = counts_at(scores, labels, tau);
        pts.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    trapezoid(pts)
}

/// Random labels with at least one positive and one negative and roughly
/// one boundary pixel in eight.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    loop {
        let labels: Vec<Label> = (0..n)
            .map(|_| match rng.gen_range(0..8) {
                0 => Label::Boundary,
                1..=3 => Label::Plume,
                _ => Label::Background,
            })
            .collect();
        if labels.contains(&Label::Plume) && labels.contains(&Label::Background) {
            return labels;
        }
    }
}
