//! Training losses: the weighted clustering cross-entropy and its gradient,
//! a lane-graph surrogate loss, the center refinement L1 loss and the total
//! loss combination.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{LaneGraph, RegionOfInterest, Vec2};
use crate::matching::GraphMatch;
use crate::matrix::Matrix;
use crate::membership::MembershipMatrix;
use crate::objects::{DetectionBox, Point3};

/// Weight of rows whose target is the outlier set.
pub const OUTLIER_WEIGHT: f64 = 0.1;

/// Clamp used by the existence binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Pre-softmax cluster scores, `objects × (curves + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix(Matrix);

impl LogitMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.all_finite() {
            return Err(Error::InvalidInput("logits must be finite".into()));
        }
        if matrix.cols() == 0 {
            return Err(Error::Shape("logits need at least the outlier column".into()));
        }
        Ok(LogitMatrix(matrix))
    }

    pub fn zeros(objects: usize, cols: usize) -> Self {
        LogitMatrix(Matrix::zeros(objects, cols.max(1)))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// Loss values for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub lane_graph_loss: f64,
    pub clustering_loss: f64,
    pub refine_loss: Option<f64>,
    pub total: f64,
    pub alpha: f64,
}

impl LossReport {
    pub fn new(lane_graph_loss: f64, clustering_loss: f64, alpha: f64) -> Self {
        LossReport {
            lane_graph_loss,
            clustering_loss,
            refine_loss: None,
            total: total_loss(lane_graph_loss, clustering_loss, alpha),
            alpha,
        }
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(logits: &LogitMatrix) -> MembershipMatrix {
    let m = logits.as_matrix();
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        softmax_row(m.row(r), out.row_mut(r));
    }
    MembershipMatrix::new(out).expect("softmax rows are distributions")
}

fn log_softmax_at(row: &[f64], col: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row[col] - lse
}

/// Validates shapes and returns the target column and row weight per object.
fn weighted_targets(
    logits: &LogitMatrix,
    target: &MembershipMatrix,
    outlier_weight: f64,
) -> Result<Vec<(usize, f64)>> {
    if logits.shape() != target.as_matrix().shape() {
        return Err(Error::Shape(format!(
            "logits are {:?}, target is {:?}",
            logits.shape(),
            target.as_matrix().shape()
        )));
    }
    if !target.is_one_hot() {
        return Err(Error::InvalidInput("clustering target must be one-hot".into()));
    }
    let outlier = target.outlier_column();
    Ok(target
        .labels()
        .into_iter()
        .map(|c| (c, if c == outlier { outlier_weight } else { 1.0 }))
        .collect())
}

/// Mean over objects of `w_j · CE(softmax(logits_j), target_j)`, where rows
/// targeting the outlier set get `outlier_weight` and all others weight 1.
/// With no objects the loss is zero.
pub fn clustering_loss(logits: &LogitMatrix, target: &MembershipMatrix, outlier_weight: f64) -> Result<f64> {
    let targets = weighted_targets(logits, target, outlier_weight)?;
    if targets.is_empty() {
        return Ok(0.0);
    }
    let m = logits.as_matrix();
    let sum: f64 = targets
        .iter()
        .enumerate()
        .map(|(r, &(c, w))| -w * log_softmax_at(m.row(r), c))
        .sum();
    Ok(sum / targets.len() as f64)
}

/// Gradient of [`clustering_loss`] with respect to the logits:
/// `w_j (softmax_j - target_j) / N` per row.
pub fn clustering_loss_grad(
    logits: &LogitMatrix,
    target: &MembershipMatrix,
    outlier_weight: f64,
) -> Result<Matrix> {
    let targets = weighted_targets(logits, target, outlier_weight)?;
    let m = logits.as_matrix();
    let n = targets.len() as f64;
    let mut grad = Matrix::zeros(m.rows(), m.cols());
    for (r, &(c, w)) in targets.iter().enumerate() {
        let row = grad.row_mut(r);
        softmax_row(m.row(r), row);
        row[c] -= 1.0;
        for g in row.iter_mut() {
            *g *= w / n;
        }
    }
    Ok(grad)
}

/// Parts of [`lane_graph_loss`], exposed for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneGraphLossParts {
    pub control_point_l1: f64,
    pub existence_bce: f64,
}

impl LaneGraphLossParts {
    pub fn total(&self) -> f64 {
        self.control_point_l1 + self.existence_bce
    }
}

pub fn lane_graph_loss_parts(
    est: &LaneGraph,
    gt: &LaneGraph,
    graph_match: &GraphMatch,
    roi: &RegionOfInterest,
) -> Result<LaneGraphLossParts> {
    check_match(est, gt, graph_match)?;
    let pairs = graph_match.pairs();
    let control_point_l1 = if pairs.is_empty() {
        0.0
    } else {
        let sum: f64 = pairs
            .iter()
            .map(|&(e, g)| {
                let a = roi.curve_to_unit(est.curve(e));
                let b = roi.curve_to_unit(gt.curve(g));
                (0..3).map(|k| (a[k] - b[k]).l1()).sum::<f64>() / 3.0
            })
            .sum();
        sum / pairs.len() as f64
    };
    let existence_bce = if est.is_empty() {
        0.0
    } else {
        let sum: f64 = (0..est.len())
            .map(|e| {
                let p = est.existence_of(e).clamp(BCE_EPS, 1.0 - BCE_EPS);
                if graph_match.gt_for(e).is_some() {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum();
        sum / est.len() as f64
    };
    Ok(LaneGraphLossParts {
        control_point_l1,
        existence_bce,
    })
}

/// Lane-graph loss surrogate: mean over matched pairs of the per-control-point
/// L1 distance in normalized coordinates, plus the mean binary cross-entropy
/// of the existence scores against "is matched".
pub fn lane_graph_loss(
    est: &LaneGraph,
    gt: &LaneGraph,
    graph_match: &GraphMatch,
    roi: &RegionOfInterest,
) -> Result<f64> {
    lane_graph_loss_parts(est, gt, graph_match, roi).map(|p| p.total())
}

pub(crate) fn check_match(est: &LaneGraph, gt: &LaneGraph, m: &GraphMatch) -> Result<()> {
    if m.n_est() != est.len() || m.n_gt() != gt.len() {
        return Err(Error::Shape(format!(
            "matching is {}x{}, graphs are {}x{}",
            m.n_est(),
            m.n_gt(),
            est.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Mean L1 distance between predicted and true object centers, in meters.
pub fn refine_loss(pred_centers: &[Vec2], gt_centers: &[Vec2]) -> Result<f64> {
    if pred_centers.len() != gt_centers.len() {
        return Err(Error::Shape(format!(
            "{} predicted centers for {} true centers",
            pred_centers.len(),
            gt_centers.len()
        )));
    }
    if pred_centers.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred_centers
        .iter()
        .zip(gt_centers)
        .map(|(p, g)| (*p - *g).l1())
        .sum();
    Ok(sum / pred_centers.len() as f64)
}

/// Moves each box so its center lands on the new center, keeping extents,
/// orientation, class and confidence.
pub fn replace_centers(boxes: &[DetectionBox], centers: &[Point3]) -> Result<Vec<DetectionBox>> {
    if boxes.len() != centers.len() {
        return Err(Error::Shape(format!(
            "{} centers for {} boxes",
            centers.len(),
            boxes.len()
        )));
    }
    Ok(boxes
        .iter()
        .zip(centers)
        .map(|(b, &c)| b.translated(c - b.center()))
        .collect())
}

/// Same as [`replace_centers`] with BEV centers; box heights are kept.
pub fn replace_bev_centers(boxes: &[DetectionBox], centers: &[Vec2]) -> Result<Vec<DetectionBox>> {
    let lifted: Vec<Point3> = boxes
        .iter()
        .zip(centers)
        .map(|(b, c)| Point3::new(c.x, b.center().y, c.z))
        .collect();
    if lifted.len() != boxes.len() || centers.len() != boxes.len() {
        return Err(Error::Shape(format!(
            "{} centers for {} boxes",
            centers.len(),
            boxes.len()
        )));
    }
    replace_centers(boxes, &lifted)
}

pub fn total_loss(lane_graph_loss: f64, clustering_loss: f64, alpha: f64) -> f64 {
    lane_graph_loss + alpha * clustering_loss
}
