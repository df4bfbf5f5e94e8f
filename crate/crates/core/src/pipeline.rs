//! Training-label factory and a geometric stand-in for one optimisation step.
//!
//! [`build_labels`] runs matching, true and target membership and the losses
//! for one sample. [`descend_curves`] treats the estimated control points as
//! the parameters and runs gradient descent on
//! `L_X + α L_C`, with the object logits tied to curve geometry so that the
//! clustering term actually moves the curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bernstein, BezierCurve, LaneGraph, RegionOfInterest, Vec2};
use crate::losses::{
    clustering_loss, clustering_loss_grad, lane_graph_loss, lane_graph_loss_parts, LogitMatrix, LossReport,
    OUTLIER_WEIGHT,
};
use crate::matching::{match_graphs, GraphMatch};
use crate::matrix::Matrix;
use crate::membership::{target_membership, true_membership, MembershipMatrix};
use crate::objects::DetectionBox;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelBundle {
    /// Membership over the true curves.
    pub z_star: MembershipMatrix,
    /// Membership over the estimated curves.
    pub z_bar: MembershipMatrix,
    pub graph_match: GraphMatch,
    pub losses: LossReport,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "alpha must be non-negative, got {alpha}"
        )))
    }
}

fn check_logits(logits: &LogitMatrix, n_objects: usize, n_pred: usize) -> Result<()> {
    if logits.shape() != (n_objects, n_pred + 1) {
        return Err(Error::Shape(format!(
            "logits are {:?}, expected {n_objects}x{}",
            logits.shape(),
            n_pred + 1
        )));
    }
    Ok(())
}

/// Labels and losses for one sample.
///
/// Without logits the clustering loss is evaluated against uniform logits,
/// which is only useful as a diagnostic.
pub fn build_labels(
    pred: &LaneGraph,
    gt: &LaneGraph,
    objects: &[DetectionBox],
    logits: Option<&LogitMatrix>,
    alpha: f64,
    roi: &RegionOfInterest,
) -> Result<LabelBundle> {
    check_alpha(alpha)?;
    let uniform;
    let logits = match logits {
        Some(l) => l,
        None => {
            uniform = LogitMatrix::zeros(objects.len(), pred.len() + 1);
            &uniform
        }
    };
    check_logits(logits, objects.len(), pred.len())?;
    let graph_match = match_graphs(pred, gt, roi)?;
    let z_star = true_membership(gt, objects)?;
    let z_bar = target_membership(&z_star, &graph_match, pred.len())?;
    let lc = clustering_loss(logits, &z_bar, OUTLIER_WEIGHT)?;
    let lx = lane_graph_loss(pred, gt, &graph_match, roi)?;
    Ok(LabelBundle {
        z_star,
        z_bar,
        graph_match,
        losses: LossReport::new(lx, lc, alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    pub alpha: f64,
    pub lr: f64,
    pub steps: usize,
    /// Length scale `s` of the geometric logits, meters.
    pub distance_scale: f64,
    /// Huber threshold of the smoothed L1 term, normalized units.
    pub huber_delta: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            alpha: 1.0,
            lr: 1e-3,
            steps: 200,
            distance_scale: 1.0,
            huber_delta: 1e-3,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.distance_scale > 0.0 && self.distance_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "distance_scale must be positive, got {}",
                self.distance_scale
            )));
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "huber_delta must be positive, got {}",
                self.huber_delta
            )));
        }
        Ok(())
    }
}

/// Losses before one step of [`descend_curves`], and after the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentStep {
    /// Smoothed objective that is being minimized.
    pub objective: f64,
    /// Exact (unsmoothed) lane-graph loss.
    pub lane_graph_loss: f64,
    pub clustering_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub graph: LaneGraph,
    /// `steps + 1` entries: the start and the state after every step.
    pub trace: Vec<DescentStep>,
    pub graph_match: GraphMatch,
    pub z_bar: MembershipMatrix,
}

fn huber(x: f64, delta: f64) -> f64 {
    if x.abs() <= delta {
        0.5 * x * x / delta
    } else {
        x.abs() - 0.5 * delta
    }
}

fn huber_grad(x: f64, delta: f64) -> f64 {
    (x / delta).clamp(-1.0, 1.0)
}

/// Everything that stays fixed while the curves move.
struct Problem<'a> {
    gt: &'a LaneGraph,
    template: &'a LaneGraph,
    centers: Vec<Vec2>,
    widths: Vec<f64>,
    bias: LogitMatrix,
    graph_match: GraphMatch,
    z_bar: MembershipMatrix,
    roi: &'a RegionOfInterest,
    config: DescentConfig,
}

impl Problem<'_> {
    fn graph(&self, params: &[[Vec2; 3]]) -> Result<LaneGraph> {
        let curves = params
            .iter()
            .map(|u| BezierCurve::from_control_points(u.map(|p| self.roi.denormalize(p))))
            .collect::<Result<Vec<_>>>()?;
        self.template.with_curves(curves)
    }

    /// `bias - D²/2s²` per curve column, `bias - W²/2s²` for the outlier set.
    fn logits(&self, graph: &LaneGraph) -> Result<LogitMatrix> {
        let inv = 1.0 / (2.0 * self.config.distance_scale.powi(2));
        let k = graph.len();
        let bias = self.bias.as_matrix();
        LogitMatrix::new(Matrix::from_fn(self.centers.len(), k + 1, |j, i| {
            let d = if i == k {
                self.widths[j]
            } else {
                graph.curve(i).distance_to(self.centers[j])
            };
            bias[(j, i)] - d * d * inv
        }))
    }

    fn evaluate(&self, params: &[[Vec2; 3]]) -> Result<DescentStep> {
        let graph = self.graph(params)?;
        let parts = lane_graph_loss_parts(&graph, self.gt, &self.graph_match, self.roi)?;
        let smooth = self.smoothed_l1(params);
        let lc = if self.config.alpha == 0.0 {
            0.0
        } else {
            clustering_loss(&self.logits(&graph)?, &self.z_bar, OUTLIER_WEIGHT)?
        };
        Ok(DescentStep {
            objective: smooth + parts.existence_bce + self.config.alpha * lc,
            lane_graph_loss: parts.total(),
            clustering_loss: lc,
        })
    }

    fn residuals(&self, params: &[[Vec2; 3]]) -> Vec<(usize, [Vec2; 3])> {
        self.graph_match
            .pairs()
            .into_iter()
            .map(|(e, g)| {
                let target = self.roi.curve_to_unit(self.gt.curve(g));
                (e, [0, 1, 2].map(|k| params[e][k] - target[k]))
            })
            .collect()
    }

    fn smoothed_l1(&self, params: &[[Vec2; 3]]) -> f64 {
        let res = self.residuals(params);
        if res.is_empty() {
            return 0.0;
        }
        let delta = self.config.huber_delta;
        let sum: f64 = res
            .iter()
            .flat_map(|(_, r)| r.iter().map(|v| huber(v.x, delta) + huber(v.z, delta)))
            .sum();
        sum / (3.0 * res.len() as f64)
    }

    fn gradient(&self, params: &[[Vec2; 3]]) -> Result<Vec<[Vec2; 3]>> {
        let mut grad = vec![[Vec2::ZERO; 3]; params.len()];
        let res = self.residuals(params);
        let delta = self.config.huber_delta;
        let norm = 1.0 / (3.0 * res.len().max(1) as f64);
        for (e, r) in &res {
            for k in 0..3 {
                grad[*e][k] = Vec2::new(huber_grad(r[k].x, delta), huber_grad(r[k].z, delta)) * norm;
            }
        }
        if self.config.alpha == 0.0 || self.centers.is_empty() {
            return Ok(grad);
        }
        // dL_C/dlogit, then through logit = bias - D²/2s² and the envelope
        // derivative dD²/dP_k = 2 b_k(t*) (B(t*) - c)
        let graph = self.graph(params)?;
        let g_logits = clustering_loss_grad(&self.logits(&graph)?, &self.z_bar, OUTLIER_WEIGHT)?;
        let inv = 1.0 / (2.0 * self.config.distance_scale.powi(2));
        let scale = self.roi.scale();
        for (i, curve) in graph.curves().iter().enumerate() {
            for (j, &c) in self.centers.iter().enumerate() {
                let w = g_logits[(j, i)];
                if w == 0.0 {
                    continue;
                }
                let proj = curve.closest_point(c);
                let b = bernstein(proj.t);
                let diff = proj.point - c;
                for k in 0..3 {
                    let d = diff * (2.0 * b[k]);
                    let g = Vec2::new(d.x * scale.x, d.z * scale.z) * (-inv * w * self.config.alpha);
                    grad[i][k] = grad[i][k] + g;
                }
            }
        }
        Ok(grad)
    }
}

/// Gradient descent on the normalized control points of `pred`.
///
/// The matching and the target membership are computed once from the
/// starting graph and held fixed. The lane term uses a Huber-smoothed L1 so
/// it is differentiable at zero; the reported `lane_graph_loss` is the exact
/// one. The clustering term scores the logits `bias - D²/2s²` (curves) and
/// `bias - W²/2s²` (outlier set), where `bias` are the supplied logits or
/// zeros. With `alpha = 0` the clustering term and its gradient are skipped.
pub fn descend_curves(
    pred: &LaneGraph,
    gt: &LaneGraph,
    objects: &[DetectionBox],
    bias: Option<&LogitMatrix>,
    config: &DescentConfig,
    roi: &RegionOfInterest,
) -> Result<Descent> {
    config.validate()?;
    let bias = match bias {
        Some(l) => l.clone(),
        None => LogitMatrix::zeros(objects.len(), pred.len() + 1),
    };
    check_logits(&bias, objects.len(), pred.len())?;
    let graph_match = match_graphs(pred, gt, roi)?;
    let z_star = true_membership(gt, objects)?;
    let z_bar = target_membership(&z_star, &graph_match, pred.len())?;
    let problem = Problem {
        gt,
        template: pred,
        centers: objects.iter().map(|b| b.bev_center()).collect(),
        widths: objects.iter().map(|b| b.short_side()).collect::<Result<_>>()?,
        bias,
        graph_match,
        z_bar,
        roi,
        config: *config,
    };

    let mut params: Vec<[Vec2; 3]> = pred.curves().iter().map(|c| roi.curve_to_unit(c)).collect();
    let first = problem.evaluate(&params)?;
    let mut trace = vec![first];
    for step in 1..=config.steps {
        let grad = problem.gradient(&params)?;
        for (p, g) in params.iter_mut().zip(&grad) {
            for k in 0..3 {
                p[k] = p[k] - g[k] * config.lr;
            }
        }
        let now = problem.evaluate(&params)?;
        if !now.objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became {} at step {step}",
                now.objective
            )));
        }
        trace.push(now);
        if now.objective > 10.0 * first.objective && now.objective > 0.0 {
            return Err(Error::Diverged {
                step,
                objective: now.objective,
                trace: trace.iter().map(|s| s.objective).collect(),
            });
        }
    }
    Ok(Descent {
        graph: problem.graph(&params)?,
        trace,
        graph_match: problem.graph_match,
        z_bar: problem.z_bar,
    })
}
