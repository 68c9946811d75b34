//! Volumetric and surface evaluation metrics.
//!
//! Volumetric scores are Monte-Carlo estimates over points sampled uniformly
//! in the unit cube with a counter-based generator, so parallel and serial
//! runs agree bit for bit. Surface scores use exact nearest neighbors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::Pt3;
use crate::kdtree::KdTree3;
use crate::rng;

/// IoU/F1/precision/recall estimated by spatial sampling.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct VolumetricReport {
    pub iou: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Chamfer distance and distance-thresholded F-score between surface samples.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SurfaceReport {
    pub chamfer_l1: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tau: f64,
}

/// Default F-score threshold: 1% of the unit side.
pub const DEFAULT_TAU: f64 = 0.01;

/// Number of sample points of the volumetric protocol.
pub const DEFAULT_VOLUMETRIC_SAMPLES: usize = 1_000_000;

/// Estimates volumetric metrics of a prediction against ground truth over
/// `n` points uniform in the (unpadded) unit cube `[-0.5, 0.5]^3`.
pub fn volumetric_metrics(
    ground_truth: &(dyn Fn(&Pt3) -> bool + Sync),
    prediction: &(dyn Fn(&Pt3) -> bool + Sync),
    n: usize,
    seed: u64,
) -> Result<VolumetricReport> {
    if n == 0 {
        return Err(CoreError::Precondition("sample count must be >= 1".into()));
    }
    let (gt_count, pred_count, both) = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = Pt3::from(rng::counter_point_in_cube(seed, i, -0.5, 0.5));
            let g = ground_truth(&p);
            let q = prediction(&p);
            (usize::from(g), usize::from(q), usize::from(g && q))
        })
        .reduce(
            || (0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
        );

    if gt_count == 0 {
        return Err(CoreError::UndefinedMetric(
            "ground truth is empty over the sample; recall undefined".into(),
        ));
    }
    let union = gt_count + pred_count - both;
    let iou = if union > 0 {
        both as f64 / union as f64
    } else {
        0.0
    };
    let precision = if pred_count > 0 {
        both as f64 / pred_count as f64
    } else {
        0.0
    };
    let recall = both as f64 / gt_count as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(VolumetricReport {
        iou,
        f1,
        precision,
        recall,
        samples: n,
        seed,
    })
}

fn nn_distances(from: &[Pt3], to: &[Pt3]) -> Vec<f64> {
    let tree = KdTree3::build(to);
    from.par_iter().map(|p| tree.nearest(p).1).collect()
}

/// Symmetric Chamfer-L1: half the sum of mean nearest-neighbor distances in
/// both directions, with unsquared Euclidean distances.
pub fn chamfer_l1(points_a: &[Pt3], points_b: &[Pt3]) -> Result<f64> {
    if points_a.is_empty() || points_b.is_empty() {
        return Err(CoreError::EmptyGeometry(
            "chamfer distance needs non-empty point sets".into(),
        ));
    }
    let ab = nn_distances(points_a, points_b);
    let ba = nn_distances(points_b, points_a);
    let mean_ab = ab.iter().sum::<f64>() / ab.len() as f64;
    let mean_ba = ba.iter().sum::<f64>() / ba.len() as f64;
    Ok(0.5 * (mean_ab + mean_ba))
}

/// Point-based precision/recall/F1 at threshold `tau`, treating `points_b`
/// as the prediction, together with the Chamfer-L1 distance.
pub fn surface_fscore(points_a: &[Pt3], points_b: &[Pt3], tau: f64) -> Result<SurfaceReport> {
    if points_a.is_empty() || points_b.is_empty() {
        return Err(CoreError::EmptyGeometry(
            "surface F-score needs non-empty point sets".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(CoreError::Precondition(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let ab = nn_distances(points_a, points_b); // recall side
    let ba = nn_distances(points_b, points_a); // precision side
    let recall = ab.iter().filter(|d| **d <= tau).count() as f64 / ab.len() as f64;
    let precision = ba.iter().filter(|d| **d <= tau).count() as f64 / ba.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let chamfer = 0.5
        * (ab.iter().sum::<f64>() / ab.len() as f64 + ba.iter().sum::<f64>() / ba.len() as f64);
    Ok(SurfaceReport {
        chamfer_l1: chamfer,
        f1,
        precision,
        recall,
        tau,
    })
}

/// Aligned-column table of volumetric results, one model per row.
pub fn format_volumetric_table(rows: &[(String, VolumetricReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>8} {:>8} {:>10} {:>8}\n",
        "Model", "IoU", "F1", "Precision", "Recall"
    ));
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3} {:>10.3} {:>8.3}\n",
            name,
            r.iou * 100.0,
            r.f1 * 100.0,
            r.precision * 100.0,
            r.recall * 100.0
        ));
    }
    out
}

/// Aligned-column table of surface results; Chamfer is reported as CD x 10.
pub fn format_surface_table(rows: &[(String, SurfaceReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>8} {:>8} {:>10} {:>8}\n",
        "Model", "CDx10", "F1", "Precision", "Recall"
    ));
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3} {:>10.3} {:>8.3}\n",
            name,
            r.chamfer_l1 * 10.0,
            r.f1 * 100.0,
            r.precision * 100.0,
            r.recall * 100.0
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn in_box(p: &Pt3, min: [f64; 3], max: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i])
    }

    #[test]
    fn identical_shapes_score_one() {
        let shape = |p: &Pt3| p.coords.norm() < 0.3;
        let r = volumetric_metrics(&shape, &shape, 1_000_000, 7).unwrap();
        assert!(r.iou >= 0.995);
        assert!(r.f1 >= 0.995);
        assert_eq!(r.iou, 1.0); // same predicate, same samples: exact
    }

    #[test]
    fn overlapping_boxes_give_one_third_iou() {
        // Overlap is half of each box; union is 3/2 of one box.
        let a = |p: &Pt3| in_box(p, [-0.4, -0.2, -0.2], [0.0, 0.2, 0.2]);
        let b = |p: &Pt3| in_box(p, [-0.2, -0.2, -0.2], [0.2, 0.2, 0.2]);
        let r = volumetric_metrics(&a, &b, 1_000_000, 11).unwrap();
        assert!((r.iou - 1.0 / 3.0).abs() < 0.005, "iou {}", r.iou);
        assert!((r.precision - 0.5).abs() < 0.01);
        assert!((r.recall - 0.5).abs() < 0.01);
    }

    #[test]
    fn disjoint_shapes_score_zero() {
        let a = |p: &Pt3| in_box(p, [-0.4, -0.4, -0.4], [-0.1, -0.1, -0.1]);
        let b = |p: &Pt3| in_box(p, [0.1, 0.1, 0.1], [0.4, 0.4, 0.4]);
        let r = volumetric_metrics(&a, &b, 200_000, 3).unwrap();
        assert_eq!(r.iou, 0.0);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn empty_ground_truth_is_undefined() {
        let empty = |_: &Pt3| false;
        let b = |p: &Pt3| p.coords.norm() < 0.3;
        assert!(matches!(
            volumetric_metrics(&empty, &b, 1000, 1),
            Err(CoreError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn swapping_swaps_precision_and_recall_exactly() {
        let a = |p: &Pt3| p.coords.norm() < 0.35;
        let b = |p: &Pt3| in_box(p, [-0.3, -0.3, -0.3], [0.2, 0.2, 0.2]);
        let r1 = volumetric_metrics(&a, &b, 300_000, 9).unwrap();
        let r2 = volumetric_metrics(&b, &a, 300_000, 9).unwrap();
        assert_eq!(r1.precision, r2.recall);
        assert_eq!(r1.recall, r2.precision);
        assert_eq!(r1.iou, r2.iou);
    }

    #[test]
    fn enlarging_prediction_cannot_decrease_recall() {
        let gt = |p: &Pt3| in_box(p, [-0.3, -0.3, -0.3], [0.3, 0.3, 0.3]);
        let mut prev_recall = 0.0;
        for half in [0.1, 0.2, 0.3, 0.4] {
            let pred = move |p: &Pt3| in_box(p, [-half, -half, -half], [half, half, half]);
            let r = volumetric_metrics(&gt, &pred, 100_000, 5).unwrap();
            assert!(r.recall >= prev_recall);
            prev_recall = r.recall;
        }
    }

    #[test]
    fn chamfer_identity_and_pair() {
        let pts = vec![Pt3::new(0.1, 0.2, 0.3), Pt3::new(-0.4, 0.0, 0.2)];
        assert_eq!(chamfer_l1(&pts, &pts).unwrap(), 0.0);
        let a = vec![Pt3::origin()];
        let b = vec![Pt3::new(0.0, 0.0, 0.7)];
        assert!((chamfer_l1(&a, &b).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn chamfer_matches_brute_force_oracle() {
        let mut r = rng::stream(13, "chamfer");
        let a: Vec<Pt3> = (0..1000)
            .map(|_| Pt3::new(r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()))
            .collect();
        let b: Vec<Pt3> = (0..1000)
            .map(|_| Pt3::new(r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()))
            .collect();
        let fast = chamfer_l1(&a, &b).unwrap();
        // O(n^2) oracle.
        let mean = |from: &[Pt3], to: &[Pt3]| {
            from.iter()
                .map(|p| {
                    to.iter()
                        .map(|q| (p - q).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / from.len() as f64
        };
        let brute = 0.5 * (mean(&a, &b) + mean(&b, &a));
        assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
    }

    #[test]
    fn chamfer_is_symmetric() {
        let mut r = rng::stream(14, "sym");
        let a: Vec<Pt3> = (0..500)
            .map(|_| Pt3::new(r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()))
            .collect();
        let b: Vec<Pt3> = (0..700)
            .map(|_| Pt3::new(r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()))
            .collect();
        assert_eq!(chamfer_l1(&a, &b).unwrap(), chamfer_l1(&b, &a).unwrap());
    }

    #[test]
    fn fscore_identity_and_shifted_grid() {
        let tau = 0.01;
        let mut a = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                a.push(Pt3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let r = surface_fscore(&a, &a, tau).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        // Shift by 2*tau: every NN distance is exactly 2*tau > tau.
        let b: Vec<Pt3> = a
            .iter()
            .map(|p| Pt3::new(p.x + 2.0 * tau, p.y, p.z))
            .collect();
        let r = surface_fscore(&a, &b, tau).unwrap();
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn fscore_half_coverage() {
        let mut a = Vec::new();
        for i in 0..100 {
            a.push(Pt3::new(i as f64, 0.0, 0.0));
        }
        let b: Vec<Pt3> = a[..50].to_vec();
        let r = surface_fscore(&a, &b, 0.1).unwrap();
        assert_eq!(r.precision, 1.0);
        // brute-force: exactly the first 50 of a are within tau of b
        let covered = a
            .iter()
            .filter(|p| b.iter().any(|q| (*p - q).norm() <= 0.1))
            .count();
        assert_eq!(covered, 50);
        assert!((r.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tables_render_with_values() {
        let vr = VolumetricReport {
            iou: 0.667,
            f1: 0.757,
            precision: 0.735,
            recall: 0.833,
            samples: 10,
            seed: 0,
        };
        let t = format_volumetric_table(&[("demo".into(), vr)]);
        assert!(t.contains("66.7"));
        assert!(t.contains("IoU"));
        let sr = SurfaceReport {
            chamfer_l1: 0.0258,
            f1: 0.415,
            precision: 0.434,
            recall: 0.402,
            tau: 0.01,
        };
        let t = format_surface_table(&[("demo".into(), sr)]);
        assert!(t.contains("0.258"));
    }
}
