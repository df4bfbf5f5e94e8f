//! Lane-graph quality scores.
//!
//! * M-F: centerline F-score from sampled curves, averaged over several
//!   distance thresholds.
//! * Detect: fraction of true centerlines whose matched estimate lies close on
//!   average.
//! * C-F: F-score of the directed edges after mapping estimated curves onto
//!   their matched true curves.
//!
//! Curves are sampled at [`SAMPLES_PER_CURVE`] uniform parameters. The
//! thresholds and empty-set conventions follow the STSU-style evaluation and
//! are fixed here; absolute numbers are only comparable between runs of this
//! crate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BezierCurve, LaneGraph, RegionOfInterest, Vec2};
use crate::matching::{match_graphs, GraphMatch};

pub const SAMPLES_PER_CURVE: usize = 100;
/// Distance thresholds of the centerline F-score, meters.
pub const MF_THRESHOLDS: [f64; 3] = [0.5, 1.0, 1.5];
pub const DETECT_THRESHOLD: f64 = 1.0;
pub const CONVENTION: &str = "stsu-style";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub m_f: f64,
    pub detect: f64,
    pub c_f: f64,
    pub per_threshold: Vec<ThresholdScore>,
    pub convention: String,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn samples(graph: &LaneGraph) -> Vec<Vec2> {
    graph
        .curves()
        .iter()
        .flat_map(|c| c.sample(SAMPLES_PER_CURVE))
        .collect()
}

/// Fraction of `points` within `threshold` of some curve of `graph`.
fn covered(points: &[Vec2], graph: &LaneGraph, threshold: f64) -> f64 {
    let hits = points
        .iter()
        .filter(|&&p| graph.curves().iter().any(|c| c.distance_to(p) <= threshold))
        .count();
    hits as f64 / points.len() as f64
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "threshold must be positive, got {threshold}"
        )))
    }
}

/// Sampled centerline precision and recall at `threshold` meters.
///
/// An empty estimate has precision 1 and recall 0 (recall 1 if the truth is
/// empty as well); an empty truth gives recall 1.
pub fn centerline_pr(est: &LaneGraph, gt: &LaneGraph, threshold: f64) -> Result<(f64, f64)> {
    check_threshold(threshold)?;
    let est_samples = samples(est);
    let gt_samples = samples(gt);
    let precision = if est_samples.is_empty() {
        1.0
    } else {
        covered(&est_samples, gt, threshold)
    };
    let recall = if gt_samples.is_empty() {
        1.0
    } else if est_samples.is_empty() {
        0.0
    } else {
        covered(&gt_samples, est, threshold)
    };
    Ok((precision, recall))
}

fn per_threshold(est: &LaneGraph, gt: &LaneGraph) -> Vec<ThresholdScore> {
    MF_THRESHOLDS
        .iter()
        .map(|&threshold| {
            let (precision, recall) = centerline_pr(est, gt, threshold).expect("thresholds are positive");
            ThresholdScore {
                threshold,
                precision,
                recall,
            }
        })
        .collect()
}

fn mean_f1(scores: &[ThresholdScore]) -> f64 {
    scores.iter().map(|s| f1(s.precision, s.recall)).sum::<f64>() / scores.len() as f64
}

/// Mean F1 of [`centerline_pr`] over [`MF_THRESHOLDS`].
pub fn m_f_score(est: &LaneGraph, gt: &LaneGraph) -> f64 {
    mean_f1(&per_threshold(est, gt))
}

/// Symmetric mean sampled distance between two curves.
pub fn mean_curve_distance(a: &BezierCurve, b: &BezierCurve) -> f64 {
    let one_way = |from: &BezierCurve, to: &BezierCurve| {
        from.sample(SAMPLES_PER_CURVE)
            .iter()
            .map(|&p| to.distance_to(p))
            .sum::<f64>()
            / SAMPLES_PER_CURVE as f64
    };
    0.5 * (one_way(a, b) + one_way(b, a))
}

/// Fraction of true curves whose matched estimate lies within `threshold`
/// meters on average. An empty truth scores 1.
pub fn detect_score(est: &LaneGraph, gt: &LaneGraph, roi: &RegionOfInterest, threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    if gt.is_empty() {
        return Ok(1.0);
    }
    let m = match_graphs(est, gt, roi)?;
    let hits = (0..gt.len())
        .filter(|&g| {
            m.est_for(g)
                .is_some_and(|e| mean_curve_distance(est.curve(e), gt.curve(g)) < threshold)
        })
        .count();
    Ok(hits as f64 / gt.len() as f64)
}

/// F1 between the true edges and the estimated edges mapped through `m`.
///
/// An estimated edge touching an unmatched curve is a false positive. No
/// edges on either side scores 1.
pub fn connectivity_f(est: &LaneGraph, gt: &LaneGraph, m: &GraphMatch) -> Result<f64> {
    if m.n_est() != est.len() || m.n_gt() != gt.len() {
        return Err(Error::Shape(format!(
            "matching covers {}x{} curves, graphs have {}x{}",
            m.n_est(),
            m.n_gt(),
            est.len(),
            gt.len()
        )));
    }
    let est_edges = est.edges();
    let gt_edges: BTreeSet<(usize, usize)> = gt.edges().into_iter().collect();
    if est_edges.is_empty() && gt_edges.is_empty() {
        return Ok(1.0);
    }
    if est_edges.is_empty() || gt_edges.is_empty() {
        return Ok(0.0);
    }
    let transported: BTreeSet<(usize, usize)> = est_edges
        .iter()
        .filter_map(|&(a, b)| Some((m.gt_for(a)?, m.gt_for(b)?)))
        .collect();
    let tp = transported.intersection(&gt_edges).count() as f64;
    Ok(f1(tp / est_edges.len() as f64, tp / gt_edges.len() as f64))
}

/// All three scores, matching the graphs once.
pub fn evaluate(est: &LaneGraph, gt: &LaneGraph, roi: &RegionOfInterest) -> Result<EvalReport> {
    let scores = per_threshold(est, gt);
    let m = match_graphs(est, gt, roi)?;
    Ok(EvalReport {
        m_f: mean_f1(&scores),
        detect: detect_score(est, gt, roi, DETECT_THRESHOLD)?,
        c_f: connectivity_f(est, gt, &m)?,
        per_threshold: scores,
        convention: CONVENTION.to_string(),
    })
}
