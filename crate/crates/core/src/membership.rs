//! Object-to-centerline membership.
//!
//! An object belongs to its closest true centerline when the distance from
//! its BEV center to that curve is strictly below the short side of its
//! footprint; otherwise it belongs to the outlier set. The labels are then
//! carried over to the estimated centerlines through the graph matching,
//! with the two outlier sets always paired.

use crate::error::{Error, Result};
use crate::geometry::LaneGraph;
use crate::matching::GraphMatch;
use crate::matrix::{argmax, Matrix};
use crate::objects::DetectionBox;

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `objects × (curves + 1)` matrix; the last column is the
/// outlier set.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix(Matrix);

impl MembershipMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.cols() == 0 {
            return Err(Error::Shape(
                "membership needs at least the outlier column".into(),
            ));
        }
        for (r, row) in matrix.iter_rows().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!("row {r} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!("row {r} sums to {sum}")));
            }
        }
        Ok(MembershipMatrix(matrix))
    }

    /// One-hot rows from column labels.
    pub fn one_hot(labels: &[usize], cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Shape(
                "membership needs at least the outlier column".into(),
            ));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= cols) {
            return Err(Error::Shape(format!("label {l} outside {cols} columns")));
        }
        Ok(MembershipMatrix(Matrix::from_fn(labels.len(), cols, |r, c| {
            if labels[r] == c {
                1.0
            } else {
                0.0
            }
        })))
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        Self::new(Matrix::from_rows(rows, cols)?)
    }

    pub fn n_objects(&self) -> usize {
        self.0.rows()
    }

    pub fn n_curves(&self) -> usize {
        self.0.cols() - 1
    }

    pub fn outlier_column(&self) -> usize {
        self.0.cols() - 1
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.0.row(r)
    }

    /// Most likely column of each row; ties go to the lowest column.
    pub fn labels(&self) -> Vec<usize> {
        self.0
            .iter_rows()
            .map(|row| argmax(row).expect("membership has at least one column"))
            .collect()
    }

    pub fn is_one_hot(&self) -> bool {
        self.0
            .iter_rows()
            .all(|row| row.iter().all(|&v| v == 0.0 || v == 1.0) && row.iter().sum::<f64>() == 1.0)
    }

    /// Hard assignment of each row to its most likely column.
    pub fn hardened(&self) -> MembershipMatrix {
        Self::one_hot(&self.labels(), self.0.cols()).expect("labels index existing columns")
    }
}

/// True membership `Z*` of `objects` with respect to the ground-truth graph.
pub fn true_membership(gt: &LaneGraph, objects: &[DetectionBox]) -> Result<MembershipMatrix> {
    let outlier = gt.len();
    let labels = objects
        .iter()
        .map(|b| {
            let width = b.short_side()?;
            let c = b.bev_center();
            let mut best: Option<(usize, f64)> = None;
            for (i, curve) in gt.curves().iter().enumerate() {
                let d = curve.distance_to(c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            Ok(match best {
                Some((i, d)) if d < width => i,
                _ => outlier,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MembershipMatrix::one_hot(&labels, outlier + 1)
}

/// Target membership `Z̄` over the estimated curves.
///
/// An object labelled with true curve `g` goes to the estimated curve matched
/// to `g`. Objects of unmatched true curves, and outlier objects, go to the
/// estimated outlier column.
pub fn target_membership(
    z_star: &MembershipMatrix,
    graph_match: &GraphMatch,
    n_est: usize,
) -> Result<MembershipMatrix> {
    if z_star.n_curves() != graph_match.n_gt() {
        return Err(Error::Shape(format!(
            "true membership covers {} curves, matching covers {}",
            z_star.n_curves(),
            graph_match.n_gt()
        )));
    }
    if n_est != graph_match.n_est() {
        return Err(Error::Shape(format!(
            "{n_est} estimated curves, matching covers {}",
            graph_match.n_est()
        )));
    }
    if !z_star.is_one_hot() {
        return Err(Error::InvalidInput("true membership must be one-hot".into()));
    }
    let est_outlier = n_est;
    let labels: Vec<usize> = z_star
        .labels()
        .into_iter()
        .map(|g| {
            if g == z_star.outlier_column() {
                est_outlier
            } else {
                graph_match.est_for(g).unwrap_or(est_outlier)
            }
        })
        .collect();
    MembershipMatrix::one_hot(&labels, n_est + 1)
}

/// Fraction of rows whose most likely column agrees.
pub fn membership_accuracy(pred: &MembershipMatrix, target: &MembershipMatrix) -> Result<f64> {
    if pred.as_matrix().shape() != target.as_matrix().shape() {
        return Err(Error::Shape(format!(
            "prediction is {:?}, target is {:?}",
            pred.as_matrix().shape(),
            target.as_matrix().shape()
        )));
    }
    let n = pred.n_objects();
    if n == 0 {
        return Ok(1.0);
    }
    let hits = pred
        .labels()
        .iter()
        .zip(target.labels())
        .filter(|(p, t)| **p == *t)
        .count();
    Ok(hits as f64 / n as f64)
}
