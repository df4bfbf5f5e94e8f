//! Seeded synthetic BEV scenes: lane layouts, vehicles driving on them and
//! clutter off the road.
//!
//! Lanes run from `z = 2` to `z = 49` m. On-lane objects sit at a random
//! curve parameter, shifted sideways by Gaussian noise clipped to half the
//! footprint width, and face along the lane. Outliers are dropped uniformly
//! over the region, at least one short side plus half a meter away from
//! every lane.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BezierCurve, LaneGraph, RegionOfInterest, Vec2};
use crate::membership::MembershipMatrix;
use crate::objects::{DetectionBox, Point3};

const LANE_START: f64 = 2.0;
const LANE_END: f64 = 49.0;
/// Lanes must stay this far inside the region.
const ROI_MARGIN: f64 = 1.0;
/// Extra clearance between outliers and the nearest lane, on top of the short side.
const OUTLIER_CLEARANCE: f64 = 0.5;
const BOX_HEIGHT: f64 = 1.6;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// Side-by-side lanes.
    Parallel,
    /// One trunk splitting into `n_lanes - 1` branches.
    Fork,
    /// `n_lanes - 1` branches joining into one trunk.
    Merge,
    /// A two-way fork with parallel lanes to its right.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_lanes: usize,
    pub pattern: Pattern,
    /// Lateral spacing between neighbouring lanes, meters.
    pub lane_gap: f64,
    pub objects_per_lane: usize,
    pub lateral_noise_sigma: f64,
    pub n_outliers: usize,
    /// Box `(length, width)` in meters.
    pub footprint: (f64, f64),
    /// Lateral offset of the middle control point of parallel lanes, meters.
    pub bend: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_lanes: 3,
            pattern: Pattern::Parallel,
            lane_gap: 3.5,
            objects_per_lane: 20,
            lateral_noise_sigma: 0.2,
            n_outliers: 0,
            footprint: (4.5, 1.8),
            bend: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (length, width) = self.footprint;
        if !(self.lane_gap > 0.0 && self.lane_gap.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lane_gap must be positive, got {}",
                self.lane_gap
            )));
        }
        if !(self.lateral_noise_sigma >= 0.0 && self.lateral_noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lateral_noise_sigma must be non-negative, got {}",
                self.lateral_noise_sigma
            )));
        }
        if !(length > 0.0 && width > 0.0 && length.is_finite() && width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "footprint must be positive, got {:?}",
                self.footprint
            )));
        }
        if !self.bend.is_finite() {
            return Err(Error::InvalidInput("bend must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub roi: RegionOfInterest,
    pub gt_graph: LaneGraph,
    pub objects: Vec<DetectionBox>,
    /// Lane each object was generated on; the last column marks outliers.
    pub gen_membership: MembershipMatrix,
}

fn straight(x0: f64, z0: f64, x1: f64, z1: f64) -> Result<BezierCurve> {
    BezierCurve::line(Vec2::new(x0, z0), Vec2::new(x1, z1))
}

/// Branch leaving `(x, z0)` and ending `offset` meters to the side at `z1`.
fn branch(x: f64, z0: f64, z1: f64, offset: f64, diverging: bool) -> Result<BezierCurve> {
    let mid = 0.5 * (z0 + z1);
    if diverging {
        BezierCurve::new(
            Vec2::new(x, z0),
            Vec2::new(x + 0.3 * offset, mid),
            Vec2::new(x + offset, z1),
        )
    } else {
        BezierCurve::new(
            Vec2::new(x + offset, z0),
            Vec2::new(x + 0.3 * offset, mid),
            Vec2::new(x, z1),
        )
    }
}

/// Curves of one layout piece and their edges.
type Piece = (Vec<BezierCurve>, Vec<(usize, usize)>);

fn slot(i: usize, n: usize, gap: f64) -> f64 {
    (i as f64 - 0.5 * (n as f64 - 1.0)) * gap
}

fn fork(n_branches: usize, x: f64, gap: f64) -> Result<Piece> {
    let split = 20.0;
    let mut curves = vec![straight(x, LANE_START, x, split)?];
    let mut edges = Vec::new();
    for b in 0..n_branches {
        curves.push(branch(x, split, LANE_END, slot(b, n_branches, gap), true)?);
        edges.push((0, b + 1));
    }
    Ok((curves, edges))
}

fn merge(n_branches: usize, x: f64, gap: f64) -> Result<Piece> {
    let join = 31.0;
    let mut curves = vec![straight(x, join, x, LANE_END)?];
    let mut edges = Vec::new();
    for b in 0..n_branches {
        curves.push(branch(x, LANE_START, join, slot(b, n_branches, gap), false)?);
        edges.push((b + 1, 0));
    }
    Ok((curves, edges))
}

fn parallel(n: usize, gap: f64, bend: f64) -> Result<Vec<BezierCurve>> {
    (0..n)
        .map(|i| {
            let x = slot(i, n, gap);
            BezierCurve::new(
                Vec2::new(x, LANE_START),
                Vec2::new(x + bend, 0.5 * (LANE_START + LANE_END)),
                Vec2::new(x, LANE_END),
            )
        })
        .collect()
}

/// Lane graph of a spec, before any objects are placed.
pub fn layout(spec: &SceneSpec) -> Result<LaneGraph> {
    let n = spec.n_lanes;
    let gap = spec.lane_gap;
    let (curves, edges) = match spec.pattern {
        _ if n == 0 => (Vec::new(), Vec::new()),
        Pattern::Parallel => (parallel(n, gap, spec.bend)?, Vec::new()),
        Pattern::Fork => fork(n - 1, 0.0, gap)?,
        Pattern::Merge => merge(n - 1, 0.0, gap)?,
        Pattern::Mixed if n < 3 => fork(n - 1, 0.0, gap)?,
        Pattern::Mixed => {
            // fork centred in slot 0 of n - 1 slots, parallel lanes in the rest
            let slots = n - 1;
            let x = slot(0, slots, gap) + 0.5 * gap;
            let (mut curves, edges) = fork(2, x, gap)?;
            for s in 2..slots {
                let xs = slot(s, slots, gap);
                curves.push(straight(xs, LANE_START, xs, LANE_END)?);
            }
            (curves, edges)
        }
    };
    LaneGraph::with_edges(curves, &edges, None)
}

fn check_fits(graph: &LaneGraph, roi: &RegionOfInterest) -> Result<()> {
    let inner = RegionOfInterest {
        x_min: roi.x_min + ROI_MARGIN,
        x_max: roi.x_max - ROI_MARGIN,
        z_min: roi.z_min + ROI_MARGIN,
        z_max: roi.z_max - ROI_MARGIN,
    };
    // the control polygon bounds the curve
    for (i, c) in graph.curves().iter().enumerate() {
        if let Some(p) = c.control_points().iter().find(|p| !inner.contains(**p)) {
            return Err(Error::Infeasible(format!(
                "lane {i} reaches {p:?}, outside the region shrunk by {ROI_MARGIN} m"
            )));
        }
    }
    Ok(())
}

/// Index of the strictly closest curve, if there is one.
fn strict_nearest(graph: &LaneGraph, p: Vec2) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut tied = false;
    for (i, c) in graph.curves().iter().enumerate() {
        let d = c.distance_to(p);
        match best {
            Some((_, bd)) if d > bd => {}
            Some((_, bd)) if d == bd => tied = true,
            _ => {
                best = Some((i, d));
                tied = false;
            }
        }
    }
    if tied {
        None
    } else {
        best
    }
}

fn on_lane_object(
    graph: &LaneGraph,
    lane: usize,
    spec: &SceneSpec,
    roi: &RegionOfInterest,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<DetectionBox> {
    let (length, width) = spec.footprint;
    let curve = graph.curve(lane);
    let limit = 0.5 * width;
    let offset = noise.sample(rng).clamp(-limit, limit);
    for _ in 0..MAX_ATTEMPTS {
        let t: f64 = rng.random();
        let tangent = curve.tangent(t);
        let c = curve.eval(t) + tangent.perp() * offset;
        let b = DetectionBox::from_footprint(
            Point3::new(c.x, 0.5 * BOX_HEIGHT, c.z),
            length,
            width,
            BOX_HEIGHT,
            tangent,
            0,
            1.0,
        )?;
        let w = b.short_side()?;
        let keeps_label = matches!(strict_nearest(graph, c), Some((i, d)) if i == lane && d < w);
        if keeps_label && roi.contains(c) {
            return Ok(b);
        }
    }
    Err(Error::Infeasible(format!(
        "could not place an object on lane {lane} that stays closest to it"
    )))
}

fn outlier_object(
    graph: &LaneGraph,
    spec: &SceneSpec,
    roi: &RegionOfInterest,
    rng: &mut ChaCha8Rng,
) -> Result<DetectionBox> {
    let (length, width) = spec.footprint;
    for _ in 0..MAX_ATTEMPTS {
        let c = Vec2::new(
            rng.random_range(roi.x_min..roi.x_max),
            rng.random_range(roi.z_min..roi.z_max),
        );
        let yaw = rng.random_range(0.0..2.0 * PI);
        let b = DetectionBox::from_footprint(
            Point3::new(c.x, 0.5 * BOX_HEIGHT, c.z),
            length,
            width,
            BOX_HEIGHT,
            Vec2::new(yaw.cos(), yaw.sin()),
            0,
            1.0,
        )?;
        let clearance = b.short_side()? + OUTLIER_CLEARANCE;
        if graph
            .curves()
            .iter()
            .all(|curve| curve.distance_to(c) >= clearance)
        {
            return Ok(b);
        }
    }
    Err(Error::Infeasible("no room left for outlier objects".into()))
}

/// Builds the scene described by `spec` in the default region.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let roi = RegionOfInterest::default();
    let graph = layout(spec)?;
    check_fits(&graph, &roi)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.lateral_noise_sigma)
        .map_err(|e| Error::InvalidInput(format!("lateral noise: {e}")))?;
    let mut objects = Vec::new();
    let mut labels = Vec::new();
    for lane in 0..graph.len() {
        for _ in 0..spec.objects_per_lane {
            objects.push(on_lane_object(&graph, lane, spec, &roi, &noise, &mut rng)?);
            labels.push(lane);
        }
    }
    for _ in 0..spec.n_outliers {
        objects.push(outlier_object(&graph, spec, &roi, &mut rng)?);
        labels.push(graph.len());
    }
    let gen_membership = MembershipMatrix::one_hot(&labels, graph.len() + 1)?;
    Ok(Scene {
        roi,
        gt_graph: graph,
        objects,
        gen_membership,
    })
}

/// Noisy copy of `graph`, standing in for an imperfect estimate.
///
/// Control points receive Gaussian jitter with standard deviation
/// `noise_sigma` in normalized region units, each curve is dropped with
/// probability `drop_prob`, and existence probabilities are lowered by
/// `|N(0, noise_sigma)|`. Edges between surviving curves are kept.
pub fn perturb_graph(
    graph: &LaneGraph,
    noise_sigma: f64,
    drop_prob: f64,
    seed: u64,
    roi: &RegionOfInterest,
) -> Result<LaneGraph> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise_sigma must be non-negative, got {noise_sigma}"
        )));
    }
    if !(0.0..=1.0).contains(&drop_prob) {
        return Err(Error::InvalidInput(format!(
            "drop_prob must lie in [0, 1], got {drop_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut kept = Vec::new();
    let mut curves = Vec::new();
    let mut existence = Vec::new();
    for (i, curve) in graph.curves().iter().enumerate() {
        if rng.random::<f64>() < drop_prob {
            continue;
        }
        if noise_sigma == 0.0 {
            curves.push(*curve);
        } else {
            let points = curve.control_points().map(|p| {
                let jitter = Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
                roi.denormalize(roi.to_unit(p) + jitter)
            });
            curves.push(BezierCurve::from_control_points(points)?);
        }
        let e = graph.existence_of(i) - normal.sample(&mut rng).abs();
        existence.push(e.clamp(0.0, 1.0));
        kept.push(i);
    }
    let incidence = kept
        .iter()
        .map(|&a| kept.iter().map(|&b| graph.connected(a, b)).collect())
        .collect();
    let existence = if noise_sigma == 0.0 {
        graph.existence().map(|e| kept.iter().map(|&i| e[i]).collect())
    } else {
        Some(existence)
    };
    LaneGraph::new(curves, incidence, existence)
}
