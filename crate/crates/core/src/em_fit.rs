//! Expectation-maximization with Bezier centerlines as cluster centers.
//!
//! Each curve `i` carries the density
//! `f_i(c) = exp(-D_i(c)² / 2σ²) / (2πσ²)`, where `D_i(c)` is the distance
//! from `c` to the curve, and a uniform background with density
//! `outlier_density` plays the outlier set. The E-step computes
//! responsibilities; the M-step alternates projection of every point onto the
//! curve with a weighted linear least-squares refit of the control points.
//! Both halves never decrease the log-likelihood, so the fit is a
//! generalized EM.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bernstein, BezierCurve, Vec2};
use crate::matrix::Matrix;
use crate::membership::MembershipMatrix;

/// Responsibility mass below which a curve is left untouched by the M-step.
pub const EMPTY_CLUSTER_WEIGHT: f64 = 1e-8;
/// Damping added to a singular normal matrix.
pub const TIKHONOV: f64 = 1e-9;
/// Projection / refit rounds per M-step.
pub const REFIT_ROUNDS: usize = 2;
/// Log-likelihood drops larger than this are counted as monotonicity violations.
pub const MONOTONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmConfig {
    pub k: usize,
    /// Distance bandwidth in meters.
    pub sigma: f64,
    /// Density of the uniform background component, per square meter.
    pub outlier_density: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl EmConfig {
    /// Defaults: background uniform over the default 50 m x 49 m region,
    /// 200 iterations, tolerance 1e-6, seed 0.
    pub fn new(k: usize, sigma: f64) -> Self {
        EmConfig {
            k,
            sigma,
            outlier_density: 1.0 / (50.0 * 49.0),
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.outlier_density >= 0.0 && self.outlier_density.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "outlier density must be non-negative, got {}",
                self.outlier_density
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    fn log_norm(&self) -> f64 {
        -(2.0 * std::f64::consts::PI * self.sigma * self.sigma).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    pub curves: Vec<BezierCurve>,
    /// `k + 1` mixing weights, the last one for the outlier set.
    pub mixing: Vec<f64>,
    pub responsibilities: MembershipMatrix,
    /// Log-likelihood of the returned curves. Trimming them to their support
    /// can leave it slightly below the last entry of `trace`.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after initialization and after every iteration.
    pub trace: Vec<f64>,
    /// Iterations whose log-likelihood fell by more than [`MONOTONE_TOL`].
    pub monotonicity_violations: usize,
}

/// Per point, the unnormalized log weights of every component.
fn log_weights(points: &[Vec2], curves: &[BezierCurve], mixing: &[f64], config: &EmConfig) -> Result<Matrix> {
    if mixing.len() != curves.len() + 1 {
        return Err(Error::Shape(format!(
            "{} mixing weights for {} curves",
            mixing.len(),
            curves.len()
        )));
    }
    let inv_two_var = 1.0 / (2.0 * config.sigma * config.sigma);
    let log_norm = config.log_norm();
    let log_outlier = mixing[curves.len()].ln() + config.outlier_density.ln();
    let k = curves.len();
    Ok(Matrix::from_fn(points.len(), k + 1, |j, i| {
        if i == k {
            log_outlier
        } else {
            let d = curves[i].distance_to(points[j]);
            mixing[i].ln() + log_norm - d * d * inv_two_var
        }
    }))
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Responsibilities `r_ij ∝ π_i f_i(c_j)`, with the outlier column
/// `∝ π_A · outlier_density`.
pub fn e_step(
    points: &[Vec2],
    curves: &[BezierCurve],
    mixing: &[f64],
    config: &EmConfig,
) -> Result<MembershipMatrix> {
    let mut w = log_weights(points, curves, mixing, config)?;
    for j in 0..w.rows() {
        let row = w.row_mut(j);
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::Numerical(format!(
                "point {j} has zero density under every component"
            )));
        }
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
    }
    MembershipMatrix::new(w)
}

/// `Σ_j log(Σ_i π_i f_i(c_j) + π_A · outlier_density)`.
pub fn log_likelihood(
    points: &[Vec2],
    curves: &[BezierCurve],
    mixing: &[f64],
    config: &EmConfig,
) -> Result<f64> {
    let w = log_weights(points, curves, mixing, config)?;
    Ok(w.iter_rows().map(log_sum_exp).sum())
}

/// Solves the symmetric 3x3 system `a x = b` by Gaussian elimination with
/// partial pivoting. `None` when a pivot is negligible.
fn solve3(a: [[f64; 3]; 3], b: [Vec2; 3]) -> Option<[Vec2; 3]> {
    let scale = a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut m = a;
    let mut rhs = b;
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..3 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] = rhs[r] - rhs[col] * f;
        }
    }
    let mut x = [Vec2::ZERO; 3];
    for r in (0..3).rev() {
        let mut acc = rhs[r];
        for c in r + 1..3 {
            acc = acc - x[c] * m[r][c];
        }
        x[r] = acc * (1.0 / m[r][r]);
    }
    Some(x)
}

/// Weighted least-squares refit of one curve with the point parameters held
/// at their projections. The x and z coordinates share the normal matrix.
fn refit(curve: &BezierCurve, points: &[Vec2], weights: &[f64]) -> BezierCurve {
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [Vec2::ZERO; 3];
    for (p, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let b = bernstein(curve.closest_point(*p).t);
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += w * b[r] * b[c];
            }
            rhs[r] = rhs[r] + *p * (w * b[r]);
        }
    }
    let solved = solve3(a, rhs).or_else(|| {
        // anchor the unconstrained directions at the current control points
        let current = curve.control_points();
        let mut damped = a;
        let mut damped_rhs = rhs;
        for i in 0..3 {
            damped[i][i] += TIKHONOV;
            damped_rhs[i] = damped_rhs[i] + current[i] * TIKHONOV;
        }
        solve3(damped, damped_rhs)
    });
    solved
        .and_then(|cp| BezierCurve::from_control_points(cp).ok())
        .unwrap_or(*curve)
}

/// Refits every curve against its responsibility column and recomputes the
/// mixing weights `π_i = Σ_j r_ij / N`.
pub fn m_step(
    points: &[Vec2],
    responsibilities: &MembershipMatrix,
    curves: &[BezierCurve],
) -> Result<(Vec<BezierCurve>, Vec<f64>)> {
    let r = responsibilities.as_matrix();
    if r.rows() != points.len() || r.cols() != curves.len() + 1 {
        return Err(Error::Shape(format!(
            "responsibilities are {:?} for {} points and {} curves",
            r.shape(),
            points.len(),
            curves.len()
        )));
    }
    let n = points.len();
    let mut new_curves = Vec::with_capacity(curves.len());
    for (i, curve) in curves.iter().enumerate() {
        let weights: Vec<f64> = (0..n).map(|j| r[(j, i)]).collect();
        let mass: f64 = weights.iter().sum();
        let mut c = *curve;
        if mass >= EMPTY_CLUSTER_WEIGHT {
            for _ in 0..REFIT_ROUNDS {
                c = refit(&c, points, &weights);
            }
        }
        new_curves.push(c);
    }
    let mixing = if n == 0 {
        vec![1.0 / (curves.len() + 1) as f64; curves.len() + 1]
    } else {
        (0..=curves.len())
            .map(|i| (0..n).map(|j| r[(j, i)]).sum::<f64>() / n as f64)
            .collect()
    };
    Ok((new_curves, mixing))
}

/// Straight segment through `seed` along the direction supported by the most
/// (weighted) points, polished by principal component analysis of those
/// supporters and spanning their extent.
fn seed_segment(seed: Vec2, points: &[Vec2], weights: &[f64], sigma: f64) -> BezierCurve {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let support = |dir: Vec2| -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(p, w)| {
                let off = (*p - seed).dot(dir.perp());
                w * (-off * off * inv).exp()
            })
            .sum()
    };
    let mut best_dir = Vec2::new(0.0, 1.0);
    let mut best_score = f64::NEG_INFINITY;
    for (p, &w) in points.iter().zip(weights) {
        if w < 0.5 {
            continue;
        }
        if let Some(dir) = (*p - seed).normalized() {
            let score = support(dir);
            if score > best_score {
                best_score = score;
                best_dir = dir;
            }
        }
    }
    let inliers: Vec<Vec2> = points
        .iter()
        .zip(weights)
        .filter(|(p, &w)| w >= 0.5 && (**p - seed).dot(best_dir.perp()).abs() <= sigma)
        .map(|(p, _)| *p)
        .collect();
    let (center, dir) = if inliers.len() >= 2 {
        let n = inliers.len() as f64;
        let mean = inliers.iter().fold(Vec2::ZERO, |a, p| a + *p) * (1.0 / n);
        let (mut sxx, mut sxz, mut szz) = (0.0, 0.0, 0.0);
        for p in &inliers {
            let d = *p - mean;
            sxx += d.x * d.x;
            sxz += d.x * d.z;
            szz += d.z * d.z;
        }
        // major axis of the 2x2 scatter matrix
        let angle = 0.5 * (2.0 * sxz).atan2(sxx - szz);
        let mut dir = Vec2::new(angle.cos(), angle.sin());
        if dir.dot(best_dir) < 0.0 {
            dir = -dir;
        }
        if sxx + szz == 0.0 {
            dir = best_dir;
        }
        (mean, dir)
    } else {
        (seed, best_dir)
    };
    let (lo, hi) = inliers
        .iter()
        .map(|p| (*p - center).dot(dir))
        .fold((0.0f64, 0.0f64), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let (lo, hi) = if hi - lo < sigma {
        (-0.5 * sigma, 0.5 * sigma)
    } else {
        (lo, hi)
    };
    BezierCurve::line(center + dir * lo, center + dir * hi).expect("seed segment has positive length")
}

/// Candidate seed points examined per curve during initialization.
const MAX_SEED_CANDIDATES: usize = 64;
/// Bandwidth used to score seed segments, as a fraction of `sigma`. Wide
/// scoring rewards segments that cut across several lanes.
const SCORE_BANDWIDTH: f64 = 0.5;

/// Greedy consensus seeding. For every candidate point a straight segment
/// is grown with [`seed_segment`]; the one with the largest Gaussian-weighted
/// support (bandwidth `SCORE_BANDWIDTH * sigma`) becomes the next curve, and the points it explains are
/// down-weighted before the next round. Points on no lane support nothing,
/// so outliers rarely become seeds. When there are more than
/// `MAX_SEED_CANDIDATES` points, the candidates are a random subset drawn
/// from `config.seed`.
pub fn initialize(points: &[Vec2], config: &EmConfig) -> Result<Vec<BezierCurve>> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidInput("cannot seed curves without points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inv = 1.0 / (2.0 * config.sigma * config.sigma);
    let score_inv = inv / (SCORE_BANDWIDTH * SCORE_BANDWIDTH);
    let mut weights = vec![1.0; points.len()];
    let mut curves = Vec::with_capacity(config.k);
    while curves.len() < config.k {
        let live: Vec<usize> = (0..points.len()).filter(|&j| weights[j] >= 0.5).collect();
        let pool: Vec<usize> = if live.is_empty() {
            (0..points.len()).collect()
        } else {
            live
        };
        let candidates: Vec<usize> = if pool.len() <= MAX_SEED_CANDIDATES {
            pool
        } else {
            rand::seq::index::sample(&mut rng, pool.len(), MAX_SEED_CANDIDATES)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        };
        let mut best: Option<(f64, BezierCurve)> = None;
        for &j in &candidates {
            let seg = seed_segment(points[j], points, &weights, config.sigma);
            let score: f64 = points
                .iter()
                .zip(&weights)
                .map(|(p, w)| w * (-seg.distance_to(*p).powi(2) * score_inv).exp())
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, seg));
            }
        }
        let (_, seg) = best.expect("at least one candidate");
        for (w, p) in weights.iter_mut().zip(points) {
            *w *= 1.0 - (-seg.distance_to(*p).powi(2) * inv).exp();
        }
        curves.push(seg);
    }
    Ok(curves)
}

/// Orients a curve so that it runs towards increasing `z` (then `x`).
fn canonical_direction(c: BezierCurve) -> BezierCurve {
    let [p0, p1, p2] = c.control_points();
    if (p2.z, p2.x) < (p0.z, p0.x) {
        BezierCurve::new(p2, p1, p0).expect("reversal keeps a valid curve")
    } else {
        c
    }
}

/// Cuts every curve down to the parameter range covered by the points
/// assigned to it, so that fitted curves do not run past their data.
fn trim_to_support(curves: &[BezierCurve], points: &[Vec2], resp: &MembershipMatrix) -> Vec<BezierCurve> {
    let labels = resp.labels();
    curves
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (lo, hi) = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == i)
                .map(|(p, _)| c.closest_point(*p).t)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                    (lo.min(t), hi.max(t))
                });
            if hi > lo {
                c.subsegment(lo, hi).unwrap_or(*c)
            } else {
                *c
            }
        })
        .collect()
}

/// Runs EM from [`initialize`] until the log-likelihood gain drops below
/// `tol` or `max_iters` is reached.
///
/// Points are processed in a canonical (sorted) order, so the result does
/// not depend on the order of the input beyond the row order of the
/// returned responsibilities.
pub fn fit(points: &[Vec2], config: &EmConfig) -> Result<EmState> {
    config.validate()?;
    if points.len() < 3 * config.k {
        return Err(Error::InvalidInput(format!(
            "{} points cannot determine {} quadratic curves (need at least {})",
            points.len(),
            config.k,
            3 * config.k
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].z.total_cmp(&points[b].z))
    });
    let sorted: Vec<Vec2> = order.iter().map(|&i| points[i]).collect();

    let mut curves = initialize(&sorted, config)?;
    let mut mixing = vec![1.0 / (config.k + 1) as f64; config.k + 1];
    let mut ll = log_likelihood(&sorted, &curves, &mixing, config)?;
    let mut trace = vec![ll];
    let mut violations = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        let resp = e_step(&sorted, &curves, &mixing, config)?;
        let (c, m) = m_step(&sorted, &resp, &curves)?;
        curves = c;
        mixing = m;
        let next = log_likelihood(&sorted, &curves, &mixing, config)?;
        if !next.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood became {next}")));
        }
        trace.push(next);
        let delta = next - ll;
        ll = next;
        if delta < -MONOTONE_TOL {
            violations += 1;
        }
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let resp_sorted = e_step(&sorted, &curves, &mixing, config)?;
    let curves: Vec<BezierCurve> = trim_to_support(&curves, &sorted, &resp_sorted)
        .into_iter()
        .map(canonical_direction)
        .collect();
    let resp_sorted = e_step(&sorted, &curves, &mixing, config)?;
    let ll = log_likelihood(&sorted, &curves, &mixing, config)?;
    let mut rows = vec![Vec::new(); points.len()];
    for (s, &orig) in order.iter().enumerate() {
        rows[orig] = resp_sorted.row(s).to_vec();
    }
    let responsibilities = MembershipMatrix::from_rows(&rows, config.k + 1)?;
    Ok(EmState {
        curves,
        mixing,
        responsibilities,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
        monotonicity_violations: violations,
    })
}
