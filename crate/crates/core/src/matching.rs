//! Minimum-cost bipartite assignment and the centerline matching built on it.

use crate::error::{Error, Result};
use crate::geometry::{LaneGraph, RegionOfInterest};
use crate::matrix::Matrix;

/// Cost given to padding cells when a rectangular matrix is squared up.
pub const PADDING_COST: f64 = 1e6;

/// Optimal assignment for a cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row, `None` for rows left over in a tall matrix.
    pub row_to_col: Vec<Option<usize>>,
    /// Row assigned to each column, `None` for columns left over in a wide matrix.
    pub col_to_row: Vec<Option<usize>>,
    /// Sum of the original costs over the assigned pairs.
    pub total: f64,
}

impl Assignment {
    /// Assigned `(row, col)` pairs in row order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
            .collect()
    }
}

/// Solves the rectangular assignment problem with the O(n³) shortest
/// augmenting path form of the Hungarian algorithm.
///
/// Exactly `min(R, C)` pairs are returned. Rectangular inputs are padded to a
/// square with [`PADDING_COST`]; pairs landing on padding are reported as
/// unmatched. Rows are inserted in index order and columns are scanned in
/// index order with strict comparisons, so equal-cost alternatives always
/// resolve the same way.
pub fn hungarian(cost: &Matrix) -> Result<Assignment> {
    let (rows, cols) = cost.shape();
    if let Some(v) = cost.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("cost matrix contains {v}")));
    }
    let n = rows.max(cols);
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            col_to_row: Vec::new(),
            total: 0.0,
        });
    }
    let a = |i: usize, j: usize| {
        if i < rows && j < cols {
            cost[(i, j)]
        } else {
            PADDING_COST
        }
    };

    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Numerical(
                    "assignment search found no augmenting column".into(),
                ));
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; rows];
    let mut col_to_row = vec![None; cols];
    let mut total = 0.0;
    for j in 1..=n {
        let (r, c) = (owner[j] - 1, j - 1);
        if r < rows && c < cols {
            row_to_col[r] = Some(c);
            col_to_row[c] = Some(r);
        }
    }
    for (r, c) in row_to_col.iter().enumerate() {
        if let Some(c) = c {
            total += cost[(r, *c)];
        }
    }
    Ok(Assignment {
        row_to_col,
        col_to_row,
        total,
    })
}

/// Pairing between estimated and ground-truth centerlines.
///
/// The two outlier sets are always paired with each other; they sit at index
/// `n_est` on the estimated side and `n_gt` on the ground-truth side.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatch {
    est_to_gt: Vec<Option<usize>>,
    gt_to_est: Vec<Option<usize>>,
}

impl GraphMatch {
    /// Builds a match from the estimated-to-true map, checking that no true
    /// curve is used twice.
    pub fn from_est_to_gt(est_to_gt: Vec<Option<usize>>, n_gt: usize) -> Result<Self> {
        let mut gt_to_est = vec![None; n_gt];
        for (e, g) in est_to_gt.iter().enumerate() {
            if let Some(g) = *g {
                if g >= n_gt {
                    return Err(Error::InvalidInput(format!(
                        "estimated curve {e} matched to missing true curve {g}"
                    )));
                }
                if gt_to_est[g].replace(e).is_some() {
                    return Err(Error::InvalidInput(format!("true curve {g} matched twice")));
                }
            }
        }
        Ok(GraphMatch { est_to_gt, gt_to_est })
    }

    pub fn identity(n: usize) -> Self {
        GraphMatch {
            est_to_gt: (0..n).map(Some).collect(),
            gt_to_est: (0..n).map(Some).collect(),
        }
    }

    pub fn n_est(&self) -> usize {
        self.est_to_gt.len()
    }

    pub fn n_gt(&self) -> usize {
        self.gt_to_est.len()
    }

    /// `H`: estimated index to true index.
    pub fn gt_for(&self, est: usize) -> Option<usize> {
        self.est_to_gt[est]
    }

    /// `H'`: true index to estimated index.
    pub fn est_for(&self, gt: usize) -> Option<usize> {
        self.gt_to_est[gt]
    }

    pub fn est_to_gt(&self) -> &[Option<usize>] {
        &self.est_to_gt
    }

    pub fn gt_to_est(&self) -> &[Option<usize>] {
        &self.gt_to_est
    }

    /// `(estimated outlier column, true outlier column)`.
    pub fn outlier_pair(&self) -> (usize, usize) {
        (self.n_est(), self.n_gt())
    }

    /// Matched `(est, gt)` pairs in estimated order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.est_to_gt
            .iter()
            .enumerate()
            .filter_map(|(e, g)| g.map(|g| (e, g)))
            .collect()
    }
}

/// Matching cost between every estimated and true centerline: mean L1
/// distance between corresponding control points in normalized coordinates
/// plus `1 - existence` of the estimate.
pub fn curve_match_cost(est: &LaneGraph, gt: &LaneGraph, roi: &RegionOfInterest) -> Matrix {
    let est_pts: Vec<_> = est.curves().iter().map(|c| roi.curve_to_unit(c)).collect();
    let gt_pts: Vec<_> = gt.curves().iter().map(|c| roi.curve_to_unit(c)).collect();
    Matrix::from_fn(est.len(), gt.len(), |i, j| {
        let l1: f64 = (0..3).map(|k| (est_pts[i][k] - gt_pts[j][k]).l1()).sum();
        l1 / 3.0 + (1.0 - est.existence_of(i))
    })
}

pub fn match_graphs(est: &LaneGraph, gt: &LaneGraph, roi: &RegionOfInterest) -> Result<GraphMatch> {
    let cost = curve_match_cost(est, gt, roi);
    let assignment = hungarian(&cost)?;
    Ok(GraphMatch {
        est_to_gt: assignment.row_to_col,
        gt_to_est: assignment.col_to_row,
    })
}
