//! ROC curves and AUC against a three-class ground truth. Boundary pixels
//! are left out of every count.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{DetectionMap, GroundTruthMask, Label};
use crate::error::{Error, Result};

/// Four-way counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub tau: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Scores of the evaluated pixels split by class.
fn evaluated(scores: &DetectionMap, gt: &GroundTruthMask) -> Result<(Vec<f64>, Vec<f64>)> {
    gt.check_against_grid(scores)?;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &l) in scores.data().iter().zip(gt.labels()) {
        match l {
            Label::Plume => pos.push(s),
            Label::Background => neg.push(s),
            Label::Boundary => {}
        }
    }
    if pos.is_empty() {
        return Err(Error::NoPositives);
    }
    if neg.is_empty() {
        return Err(Error::NoNegatives);
    }
    Ok((pos, neg))
}

/// Counts at threshold `tau`; a score `>= tau` is called positive.
pub fn confusion_at(scores: &DetectionMap, gt: &GroundTruthMask, tau: f64) -> Result<Confusion> {
    let (pos, neg) = evaluated(scores, gt)?;
    let tp = pos.iter().filter(|&&s| s >= tau).count();
    let fp = neg.iter().filter(|&&s| s >= tau).count();
    Ok(Confusion {
        tp,
        fp,
        tn: neg.len() - fp,
        fn_: pos.len() - tp,
    })
}

/// Exact ROC: one point per distinct score, in decreasing threshold order,
/// preceded by a threshold above every score.
pub fn roc(scores: &DetectionMap, gt: &GroundTruthMask) -> Result<RocCurve> {
    let (pos, neg) = evaluated(scores, gt)?;
    let (n_pos, n_neg) = (pos.len(), neg.len());
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let max = all[0].0;
    let top = if max + 1.0 > max { max + 1.0 } else { f64::INFINITY };
    let mut points = vec![RocPoint {
        tau: top,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let tau = all[i].0;
        while i < all.len() && all[i].0 == tau {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            tau,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = trapezoid(&points);
    Ok(RocCurve {
        points,
        auc,
        n_pos,
        n_neg,
    })
}

fn trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Trapezoidal area under the stored points.
pub fn auc_of(curve: &RocCurve) -> f64 {
    trapezoid(&curve.points)
}

/// Convenience: AUC of a map against a mask.
pub fn auc(scores: &DetectionMap, gt: &GroundTruthMask) -> Result<f64> {
    Ok(roc(scores, gt)?.auc)
}

/// CSV text: header `tau,fpr,tpr` (plus `xscale=log` when requested), one
/// row per point with 17 significant digits, then `# auc=<value>`.
pub fn roc_csv_string(curve: &RocCurve, log_x: bool) -> String {
    let mut out = String::from("tau,fpr,tpr");
    if log_x {
        out.push_str(",xscale=log");
    }
    out.push('\n');
    for p in &curve.points {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.tau, p.fpr, p.tpr);
    }
    let _ = writeln!(out, "# auc={:.16e}", curve.auc);
    out
}

pub fn roc_to_csv(curve: &RocCurve, path: &Path, log_x: bool) -> Result<()> {
    std::fs::write(path, roc_csv_string(curve, log_x)).map_err(|e| Error::io(path, e))
}

/// Reads back the output of [`roc_csv_string`]. Counts are not stored in
/// the file and come back as zero.
pub fn parse_roc_csv(text: &str) -> Result<RocCurve> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("tau,fpr,tpr") => {}
        Some(_) => return Err(Error::UnparseableLine(1)),
        None => return Err(Error::EmptyFile),
    }
    let mut points = Vec::new();
    let mut auc = None;
    for (i, line) in lines {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# auc=") {
            auc = Some(rest.parse().map_err(|_| Error::UnparseableLine(i + 1))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::UnparseableLine(i + 1))?;
        if fields.len() != 3 {
            return Err(Error::UnparseableLine(i + 1));
        }
        points.push(RocPoint {
            tau: fields[0],
            fpr: fields[1],
            tpr: fields[2],
        });
    }
    let auc = auc.unwrap_or_else(|| trapezoid(&points));
    Ok(RocCurve {
        points,
        auc,
        n_pos: 0,
        n_neg: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Grid;

    fn scene(scores: &[f64], labels: &[Label]) -> (DetectionMap, GroundTruthMask) {
        let n = scores.len();
        (
            Grid::new(n, 1, scores.to_vec()).unwrap(),
            GroundTruthMask::new(n, 1, labels.to_vec()).unwrap(),
        )
    }

    use Label::{Background as B, Boundary as X, Plume as P};

    #[test]
    fn confusion_examples() {
        let (m, g) = scene(&[1.0, 1.0, 0.0, 0.0, 0.0], &[P, P, B, B, B]);
        assert_eq!(confusion_at(&m, &g, 0.5).unwrap(), Confusion { tp: 2, fp: 0, tn: 3, fn_: 0 });
        assert_eq!(confusion_at(&m, &g, 1.5).unwrap(), Confusion { tp: 0, fp: 0, tn: 3, fn_: 2 });

        let (m, g) = scene(&[0.9, 0.5, 0.1], &[P, X, B]);
        assert_eq!(confusion_at(&m, &g, 0.5).unwrap(), Confusion { tp: 1, fp: 0, tn: 1, fn_: 0 });
    }

    #[test]
    fn missing_classes() {
        let (m, g) = scene(&[0.1, 0.2], &[B, X]);
        assert!(matches!(roc(&m, &g), Err(Error::NoPositives)));
        let (m, g) = scene(&[0.1, 0.2], &[P, X]);
        assert!(matches!(roc(&m, &g), Err(Error::NoNegatives)));
    }

    #[test]
    fn perfect_and_reversed() {
        let (m, g) = scene(&[0.9, 0.8, 0.2, 0.1], &[P, P, B, B]);
        let c = roc(&m, &g).unwrap();
        assert_eq!(c.auc, 1.0);
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(first.tau > 0.9);

        let flipped = crate::classifiers::reverse_scores(&m);
        assert_eq!(roc(&m.map(|x| -x), &g).unwrap().auc, 0.0);
        assert_eq!(roc(&flipped, &g).unwrap().auc, 0.0);
        assert_eq!(roc(&crate::classifiers::reverse_scores(&flipped), &g).unwrap().auc, 1.0);
    }

    #[test]
    fn ties_collapse_to_one_point() {
        let (m, g) = scene(&[0.5, 0.5, 0.5, 0.5], &[P, B, P, B]);
        let c = roc(&m, &g).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn auc_of_hand_curves() {
        let curve = |pts: &[(f64, f64)]| RocCurve {
            points: pts.iter().map(|&(fpr, tpr)| RocPoint { tau: 0.0, fpr, tpr }).collect(),
            auc: 0.0,
            n_pos: 1,
            n_neg: 1,
        };
        assert_eq!(auc_of(&curve(&[(0.0, 0.0), (1.0, 1.0)])), 0.5);
        assert_eq!(auc_of(&curve(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)])), 1.0);
        assert!((auc_of(&curve(&[(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn stored_auc_is_trapezoid_of_points() {
        let (m, g) = scene(&[0.3, 0.7, 0.7, 0.1, 0.9, 0.2], &[P, B, P, B, P, B]);
        let c = roc(&m, &g).unwrap();
        assert!((auc_of(&c) - c.auc).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let (m, g) = scene(&[0.1, 0.9], &[B, P]);
        let c = roc(&m, &g).unwrap();
        let text = roc_csv_string(&c, false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tau,fpr,tpr");
        assert_eq!(lines.len(), 1 + c.points.len() + 1);
        assert!(lines.last().unwrap().starts_with("# auc="));
        let back = parse_roc_csv(&text).unwrap();
        assert_eq!(back.points, c.points);
        assert_eq!(back.auc, c.auc);

        assert!(roc_csv_string(&c, true).starts_with("tau,fpr,tpr,xscale=log\n"));
    }

    #[test]
    fn two_point_curve_has_two_rows() {
        let c = RocCurve {
            points: vec![
                RocPoint { tau: 2.0, fpr: 0.0, tpr: 0.0 },
                RocPoint { tau: 1.0, fpr: 1.0, tpr: 1.0 },
            ],
            auc: 0.5,
            n_pos: 1,
            n_neg: 1,
        };
        let text = roc_csv_string(&c, false);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 1);
    }
}
