//! Lane-graph data model: 2D bird's-eye-view points, quadratic Bezier
//! centerlines, the graph that ties them together and the region of interest
//! used to normalize coordinates.
//!
//! Coordinates are meters throughout. `x` is lateral, `z` is longitudinal.
//! Normalization to the unit square only happens at encoding and loss
//! boundaries.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Vec2 { x, z }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Rotated a quarter turn counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.z, self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn l1(self) -> f64 {
        self.x.abs() + self.z.abs()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, z]: [f64; 2]) -> Self {
        Vec2::new(x, z)
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.z]
    }
}

/// Quadratic Bernstein basis at `t`.
pub fn bernstein(t: f64) -> [f64; 3] {
    let s = 1.0 - t;
    [s * s, 2.0 * s * t, t * t]
}

/// Result of projecting a point onto a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub t: f64,
    pub point: Vec2,
    pub distance: f64,
}

/// A centerline: quadratic Bezier curve
/// `B(t) = (1-t)² p0 + 2t(1-t) p1 + t² p2`, `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BezierCurve {
    p0: Vec2,
    p1: Vec2,
    p2: Vec2,
}

impl BezierCurve {
    /// Rejects non-finite control points and the fully collapsed curve
    /// `p0 = p1 = p2`. Closed loops (`p0 = p2`, `p1` elsewhere) are allowed.
    pub fn new(p0: Vec2, p1: Vec2, p2: Vec2) -> Result<Self> {
        if !(p0.is_finite() && p1.is_finite() && p2.is_finite()) {
            return Err(Error::Geometry("control points must be finite".into()));
        }
        if p0 == p1 && p1 == p2 {
            return Err(Error::Geometry("all three control points coincide".into()));
        }
        Ok(BezierCurve { p0, p1, p2 })
    }

    /// Straight segment from `a` to `b` with the middle control point at the midpoint.
    pub fn line(a: Vec2, b: Vec2) -> Result<Self> {
        Self::new(a, (a + b) * 0.5, b)
    }

    pub fn from_control_points(points: [Vec2; 3]) -> Result<Self> {
        Self::new(points[0], points[1], points[2])
    }

    pub fn control_points(&self) -> [Vec2; 3] {
        [self.p0, self.p1, self.p2]
    }

    pub fn p0(&self) -> Vec2 {
        self.p0
    }

    pub fn p1(&self) -> Vec2 {
        self.p1
    }

    pub fn p2(&self) -> Vec2 {
        self.p2
    }

    /// Curve point at `t`, rejecting parameters outside `[0, 1]`.
    pub fn point(&self, t: f64) -> Result<Vec2> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("curve parameter {t} outside [0, 1]")));
        }
        Ok(self.eval(t))
    }

    /// Unchecked evaluation. Endpoints are returned exactly.
    pub fn eval(&self, t: f64) -> Vec2 {
        if t == 0.0 {
            return self.p0;
        }
        if t == 1.0 {
            return self.p2;
        }
        let [b0, b1, b2] = bernstein(t);
        self.p0 * b0 + self.p1 * b1 + self.p2 * b2
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        (self.p1 - self.p0) * (2.0 * (1.0 - t)) + (self.p2 - self.p1) * (2.0 * t)
    }

    /// Unit tangent at `t`. Falls back to the chord direction where the
    /// derivative vanishes.
    pub fn tangent(&self, t: f64) -> Vec2 {
        self.derivative(t)
            .normalized()
            .or_else(|| (self.p2 - self.p0).normalized())
            .or_else(|| (self.p1 - self.p0).normalized())
            .unwrap_or(Vec2::new(0.0, 1.0))
    }

    pub fn translated(&self, by: Vec2) -> BezierCurve {
        BezierCurve {
            p0: self.p0 + by,
            p1: self.p1 + by,
            p2: self.p2 + by,
        }
    }

    /// The piece of the curve between `t0` and `t1`, reparametrized to `[0, 1]`.
    pub fn subsegment(&self, t0: f64, t1: f64) -> Result<BezierCurve> {
        let blossom = |a: f64, b: f64| {
            self.p0 * ((1.0 - a) * (1.0 - b)) + self.p1 * ((1.0 - a) * b + a * (1.0 - b)) + self.p2 * (a * b)
        };
        BezierCurve::new(self.eval(t0), blossom(t0, t1), self.eval(t1))
    }

    /// Uniform parameter samples `t_i = i / (n - 1)`.
    pub fn sample(&self, n: usize) -> Vec<Vec2> {
        match n {
            0 => Vec::new(),
            1 => vec![self.eval(0.5)],
            _ => (0..n).map(|i| self.eval(i as f64 / (n - 1) as f64)).collect(),
        }
    }

    /// Closest point on the curve to `q`.
    ///
    /// The stationary points of `|B(t) - q|²` are the real roots of a cubic.
    /// The cubic is split into monotone pieces at the roots of its derivative
    /// and every sign change is bisected to machine precision. Candidates are
    /// those roots plus both endpoints; ties go to the smaller `t`.
    pub fn closest_point(&self, q: Vec2) -> Projection {
        // B(t) - q = a t² + b t + d
        let a = self.p0 - self.p1 * 2.0 + self.p2;
        let b = (self.p1 - self.p0) * 2.0;
        let d = self.p0 - q;
        // (B - q) · B'(t) = c3 t³ + c2 t² + c1 t + c0
        let c3 = 2.0 * a.dot(a);
        let c2 = 3.0 * a.dot(b);
        let c1 = b.dot(b) + 2.0 * a.dot(d);
        let c0 = b.dot(d);
        let g = |t: f64| ((c3 * t + c2) * t + c1) * t + c0;

        let mut breaks = vec![0.0];
        let mut crit = quadratic_roots(3.0 * c3, 2.0 * c2, c1);
        crit.sort_by(f64::total_cmp);
        breaks.extend(crit.into_iter().filter(|&r| r > 0.0 && r < 1.0));
        breaks.push(1.0);

        let mut candidates = vec![0.0, 1.0];
        for w in breaks.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (glo, ghi) = (g(lo), g(hi));
            if glo == 0.0 {
                candidates.push(lo);
                continue;
            }
            if ghi == 0.0 {
                candidates.push(hi);
                continue;
            }
            if glo.signum() == ghi.signum() {
                continue;
            }
            let rising = glo < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (g(mid) < 0.0) == rising {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(0.5 * (lo + hi));
        }

        let mut best = Projection {
            t: f64::NAN,
            point: Vec2::ZERO,
            distance: f64::INFINITY,
        };
        candidates.sort_by(f64::total_cmp);
        for t in candidates {
            let p = self.eval(t);
            let dist = p.distance(q);
            if dist < best.distance {
                best = Projection {
                    t,
                    point: p,
                    distance: dist,
                };
            }
        }
        best
    }

    pub fn distance_to(&self, q: Vec2) -> f64 {
        self.closest_point(q).distance
    }
}

/// Real roots of `a x² + b x + c`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b == 0 and c == 0
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Set of centerlines plus directed incidence (`incidence[a][b]` means `b`
/// follows `a`) and optional per-curve existence probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGraph {
    curves: Vec<BezierCurve>,
    incidence: Vec<Vec<bool>>,
    existence: Option<Vec<f64>>,
}

impl LaneGraph {
    pub fn new(
        curves: Vec<BezierCurve>,
        incidence: Vec<Vec<bool>>,
        existence: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = curves.len();
        if incidence.len() != n || incidence.iter().any(|row| row.len() != n) {
            return Err(Error::Shape(format!("incidence must be {n}x{n} for {n} curves")));
        }
        if let Some((i, _)) = incidence.iter().enumerate().find(|(i, row)| row[*i]) {
            return Err(Error::InvalidInput(format!("curve {i} is connected to itself")));
        }
        if let Some(e) = &existence {
            if e.len() != n {
                return Err(Error::Shape(format!(
                    "{} existence values for {n} curves",
                    e.len()
                )));
            }
            if let Some(p) = e.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidInput(format!(
                    "existence probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(LaneGraph {
            curves,
            incidence,
            existence,
        })
    }

    /// Graph without edges or existence scores.
    pub fn from_curves(curves: Vec<BezierCurve>) -> Self {
        let n = curves.len();
        LaneGraph {
            curves,
            incidence: vec![vec![false; n]; n],
            existence: None,
        }
    }

    /// Builds the incidence matrix from a list of directed `(from, to)` edges.
    pub fn with_edges(
        curves: Vec<BezierCurve>,
        edges: &[(usize, usize)],
        existence: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = curves.len();
        let mut incidence = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) references a curve outside 0..{n}"
                )));
            }
            incidence[a][b] = true;
        }
        Self::new(curves, incidence, existence)
    }

    pub fn empty() -> Self {
        Self::from_curves(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[BezierCurve] {
        &self.curves
    }

    pub fn curve(&self, i: usize) -> &BezierCurve {
        &self.curves[i]
    }

    pub fn incidence(&self) -> &[Vec<bool>] {
        &self.incidence
    }

    pub fn connected(&self, from: usize, to: usize) -> bool {
        self.incidence[from][to]
    }

    pub fn existence(&self) -> Option<&[f64]> {
        self.existence.as_deref()
    }

    /// Existence probability of curve `i`; 1 when the graph carries none.
    pub fn existence_of(&self, i: usize) -> f64 {
        self.existence.as_ref().map_or(1.0, |e| e[i])
    }

    /// Directed edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, row) in self.incidence.iter().enumerate() {
            for (b, &on) in row.iter().enumerate() {
                if on {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Same topology and existence, new geometry.
    pub fn with_curves(&self, curves: Vec<BezierCurve>) -> Result<Self> {
        Self::new(curves, self.incidence.clone(), self.existence.clone())
    }

    /// Reorders the curves: curve `i` of the result is curve `order[i]` of
    /// `self`. Incidence and existence follow the curves.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&o| o >= n || std::mem::replace(&mut seen[o], true))
        {
            return Err(Error::InvalidInput("order is not a permutation".into()));
        }
        let curves = order.iter().map(|&o| self.curves[o]).collect();
        let incidence = order
            .iter()
            .map(|&a| order.iter().map(|&b| self.incidence[a][b]).collect())
            .collect();
        let existence = self
            .existence
            .as_ref()
            .map(|e| order.iter().map(|&o| e[o]).collect());
        Self::new(curves, incidence, existence)
    }

    /// Point-to-curve distances: entry `(i, j)` is the distance in meters
    /// from `centers[j]` to curve `i`.
    pub fn distance_matrix(&self, centers: &[Vec2]) -> Matrix {
        Matrix::from_fn(self.len(), centers.len(), |i, j| {
            self.curves[i].distance_to(centers[j])
        })
    }
}

/// Rectangle of the BEV plane covered by a lane graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionOfInterest {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for RegionOfInterest {
    fn default() -> Self {
        RegionOfInterest {
            x_min: -25.0,
            x_max: 25.0,
            z_min: 1.0,
            z_max: 50.0,
        }
    }
}

/// A normalized point and whether it had to be clamped into the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub point: Vec2,
    pub clamped: bool,
}

impl RegionOfInterest {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        let roi = RegionOfInterest {
            x_min,
            x_max,
            z_min,
            z_max,
        };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.z_min >= self.z_max {
            return Err(Error::InvalidInput(format!(
                "degenerate region of interest {self:?}"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    /// Per-axis meters per normalized unit.
    pub fn scale(&self) -> Vec2 {
        Vec2::new(self.width(), self.depth())
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.z_min + self.z_max))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.z_min..=self.z_max).contains(&p.z)
    }

    /// Maps `p` into `[0, 1]²`, clamping points that fall outside.
    pub fn normalize(&self, p: Vec2) -> Normalized {
        let raw = self.to_unit(p);
        let point = Vec2::new(raw.x.clamp(0.0, 1.0), raw.z.clamp(0.0, 1.0));
        Normalized {
            point,
            clamped: point != raw,
        }
    }

    /// Inverse of [`normalize`](Self::normalize) for in-region points.
    pub fn denormalize(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.x_min + p.x * self.width(), self.z_min + p.z * self.depth())
    }

    /// The affine normalization without clamping.
    pub fn to_unit(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            (p.x - self.x_min) / self.width(),
            (p.z - self.z_min) / self.depth(),
        )
    }

    pub fn curve_to_unit(&self, curve: &BezierCurve) -> [Vec2; 3] {
        curve.control_points().map(|p| self.to_unit(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> BezierCurve {
        BezierCurve::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0), Vec2::new(4.0, 0.0)).unwrap()
    }

    fn dense_distance(curve: &BezierCurve, q: Vec2, n: usize) -> f64 {
        (0..=n)
            .map(|i| curve.eval(i as f64 / n as f64).distance(q))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn endpoints_and_midpoint() {
        let c = arch();
        assert_eq!(c.point(0.0).unwrap(), c.p0());
        assert_eq!(c.point(1.0).unwrap(), c.p2());
        assert_eq!(c.point(0.5).unwrap(), Vec2::new(2.0, 1.0));
    }

    #[test]
    fn parameter_outside_unit_interval_is_a_domain_error() {
        assert!(matches!(arch().point(1.5), Err(Error::Domain(_))));
        assert!(matches!(arch().point(-1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn collapsed_curve_rejected_but_loop_allowed() {
        let p = Vec2::new(1.0, 1.0);
        assert!(BezierCurve::new(p, p, p).is_err());
        assert!(BezierCurve::new(p, Vec2::new(3.0, 4.0), p).is_ok());
        assert!(BezierCurve::new(p, Vec2::new(f64::NAN, 0.0), p).is_err());
    }

    #[test]
    fn projection_of_on_curve_point_is_exact() {
        let c = arch();
        let q = c.eval(0.3);
        let proj = c.closest_point(q);
        assert!(proj.distance <= 1e-9);
        assert!((proj.t - 0.3).abs() < 1e-6);
    }

    #[test]
    fn projection_matches_dense_sampling() {
        let c = arch();
        let q = Vec2::new(2.0, 3.0);
        let oracle = dense_distance(&c, q, 100_000);
        assert!((c.closest_point(q).distance - oracle).abs() < 1e-4);
    }

    #[test]
    fn projection_clamps_past_the_end() {
        let c = arch();
        // exit direction at p2 is (2, -2)
        let q = Vec2::new(14.0, -10.0);
        let proj = c.closest_point(q);
        assert_eq!(proj.t, 1.0);
        assert_eq!(proj.distance, q.distance(c.p2()));
    }

    #[test]
    fn projection_on_straight_and_loop_curves() {
        let line = BezierCurve::line(Vec2::new(0.0, 0.0), Vec2::new(0.0, 10.0)).unwrap();
        let proj = line.closest_point(Vec2::new(3.0, 4.0));
        assert!((proj.distance - 3.0).abs() < 1e-12);
        assert!((proj.t - 0.4).abs() < 1e-12);

        let looped = BezierCurve::new(Vec2::ZERO, Vec2::new(0.0, 4.0), Vec2::ZERO).unwrap();
        let q = Vec2::new(1.0, 1.0);
        assert!((looped.closest_point(q).distance - dense_distance(&looped, q, 100_000)).abs() < 1e-4);
    }

    #[test]
    fn distance_matrix_shapes_and_entries() {
        let g = LaneGraph::from_curves(vec![arch()]);
        assert_eq!(g.distance_matrix(&[]).shape(), (1, 0));
        let m = g.distance_matrix(&[arch().eval(0.7)]);
        assert!(m[(0, 0)] < 1e-9);
    }

    #[test]
    fn graph_validation() {
        let c = arch();
        assert!(LaneGraph::new(vec![c], vec![vec![true]], None).is_err());
        assert!(LaneGraph::new(vec![c], vec![vec![false]], Some(vec![1.2])).is_err());
        assert!(LaneGraph::new(vec![c, c], vec![vec![false]], None).is_err());
        let g = LaneGraph::with_edges(vec![c, c.translated(Vec2::new(0.0, 5.0))], &[(0, 1)], None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.existence_of(1), 1.0);
    }

    #[test]
    fn permuting_carries_incidence_along() {
        let a = arch();
        let b = a.translated(Vec2::new(10.0, 0.0));
        let c = a.translated(Vec2::new(20.0, 0.0));
        let g = LaneGraph::with_edges(vec![a, b, c], &[(0, 2)], Some(vec![0.1, 0.2, 0.3])).unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.curve(0), &c);
        assert_eq!(p.edges(), vec![(1, 0)]);
        assert_eq!(p.existence().unwrap(), &[0.3, 0.1, 0.2]);
        assert!(g.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn default_roi_normalization() {
        let roi = RegionOfInterest::default();
        assert_eq!(roi.normalize(Vec2::new(-25.0, 1.0)).point, Vec2::new(0.0, 0.0));
        assert_eq!(roi.normalize(Vec2::new(25.0, 50.0)).point, Vec2::new(1.0, 1.0));
        assert_eq!(roi.normalize(Vec2::new(0.0, 25.5)).point, Vec2::new(0.5, 0.5));
        let out = roi.normalize(Vec2::new(30.0, 0.0));
        assert!(out.clamped);
        assert_eq!(out.point, Vec2::new(1.0, 0.0));
        assert!(RegionOfInterest::new(1.0, 1.0, 0.0, 2.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coord() -> impl Strategy<Value = f64> {
            -20.0..20.0f64
        }

        fn curve() -> impl Strategy<Value = BezierCurve> {
            (coord(), coord(), coord(), coord(), coord(), coord())
                .prop_filter_map("collapsed", |(a, b, c, d, e, f)| {
                    BezierCurve::new(Vec2::new(a, b), Vec2::new(c, d), Vec2::new(e, f)).ok()
                })
        }

        proptest! {
            #[test]
            fn normalize_round_trips(x in -25.0..25.0f64, z in 1.0..50.0f64) {
                let roi = RegionOfInterest::default();
                let p = Vec2::new(x, z);
                let n = roi.normalize(p);
                prop_assert!(!n.clamped);
                let back = roi.denormalize(n.point);
                prop_assert!((back.x - x).abs() <= 1e-12 && (back.z - z).abs() <= 1e-12);
            }

            #[test]
            fn projection_never_worse_than_endpoints(c in curve(), qx in coord(), qz in coord()) {
                let q = Vec2::new(qx, qz);
                let d = c.closest_point(q).distance;
                prop_assert!(d <= q.distance(c.p0()).min(q.distance(c.p2())));
            }

            #[test]
            fn evaluation_is_translation_equivariant(
                c in curve(), t in 0.0..=1.0f64, vx in coord(), vz in coord()
            ) {
                let v = Vec2::new(vx, vz);
                let moved = c.translated(v).eval(t);
                let expected = c.eval(t) + v;
                prop_assert!((moved - expected).norm() < 1e-9);
            }
        }
    }
}
