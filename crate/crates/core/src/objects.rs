//! 3D detection boxes and the quantities the clustering needs from them:
//! the BEV center, the short footprint side and the 28-value feature vector.

use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::geometry::{RegionOfInterest, Vec2};

/// Length of [`DetectionBox::encode_feature`]: center and 8 corners, 3 values
/// each, plus the confidence scalar.
pub const FEATURE_LEN: usize = 9 * 3 + 1;

const CUBOID_TOL: f64 = 1e-6;

/// A 3D point with `y` as height.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn bev(self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn dist(self, o: Point3) -> f64 {
        let d = self - o;
        (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3::new(x, y, z)
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// An oriented 3D box.
///
/// Corners are ordered bottom face counter-clockwise (seen from above, `x`
/// right and `z` up), then the top face in the same order, so corner `i + 4`
/// sits directly above corner `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionBox {
    center: Point3,
    corners: [Point3; 8],
    class_id: u32,
    confidence: f64,
}

impl DetectionBox {
    pub fn new(center: Point3, corners: [Point3; 8], class_id: u32, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidInput(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        if !center.is_finite() || corners.iter().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("box coordinates must be finite".into()));
        }
        let mean = |pts: &[Point3]| {
            let n = pts.len() as f64;
            let s = pts.iter().fold(Point3::default(), |acc, &p| acc + p);
            Point3::new(s.x / n, s.y / n, s.z / n)
        };
        let bottom = mean(&corners[..4]);
        let top = mean(&corners[4..]);
        let mid = Point3::new(
            0.5 * (bottom.x + top.x),
            0.5 * (bottom.y + top.y),
            0.5 * (bottom.z + top.z),
        );
        if mid.dist(center) > CUBOID_TOL {
            return Err(Error::Geometry(format!(
                "face centroids average to {mid:?}, not the center {center:?}"
            )));
        }
        // opposite edges of each face must match for a cuboid
        for face in [&corners[..4], &corners[4..]] {
            let e01 = face[1] - face[0];
            let e32 = face[2] - face[3];
            if (e01 - e32).bev().norm() > CUBOID_TOL || (e01.y - e32.y).abs() > CUBOID_TOL {
                return Err(Error::Geometry("box faces are not parallelograms".into()));
            }
        }
        Ok(DetectionBox {
            center,
            corners,
            class_id,
            confidence,
        })
    }

    /// Box standing on its footprint, `length` along `heading` (a BEV
    /// direction, need not be unit) and `width` across it.
    pub fn from_footprint(
        center: Point3,
        length: f64,
        width: f64,
        height: f64,
        heading: Vec2,
        class_id: u32,
        confidence: f64,
    ) -> Result<Self> {
        let fwd = heading
            .normalized()
            .ok_or_else(|| Error::Geometry("heading must be non-zero".into()))?;
        let left = fwd.perp();
        let (hl, hw, hh) = (0.5 * length, 0.5 * width, 0.5 * height);
        let local = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
        let mut corners = [Point3::default(); 8];
        for (i, &(a, b)) in local.iter().enumerate() {
            let p = center.bev() + fwd * a + left * b;
            corners[i] = Point3::new(p.x, center.y - hh, p.z);
            corners[i + 4] = Point3::new(p.x, center.y + hh, p.z);
        }
        Self::new(center, corners, class_id, confidence)
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn corners(&self) -> &[Point3; 8] {
        &self.corners
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Center projected onto the ground plane.
    pub fn bev_center(&self) -> Vec2 {
        self.center.bev()
    }

    /// Shorter of the two footprint edges, in meters.
    pub fn short_side(&self) -> Result<f64> {
        let [a, b] = self.footprint_sides();
        let w = a.min(b);
        if w.is_nan() || w <= 1e-12 {
            return Err(Error::Geometry("box footprint has zero area".into()));
        }
        Ok(w)
    }

    /// The two footprint edge lengths, `|c1 - c0|` and `|c2 - c1|`.
    pub fn footprint_sides(&self) -> [f64; 2] {
        let c = &self.corners;
        [c[1].bev().distance(c[0].bev()), c[2].bev().distance(c[1].bev())]
    }

    /// Feature vector: center then corners as `(x_n, height, z_n)` triples,
    /// followed by the confidence. `x` and `z` are normalized (and clamped)
    /// into the region of interest; height stays in meters.
    pub fn encode_feature(&self, roi: &RegionOfInterest) -> [f64; FEATURE_LEN] {
        let mut out = [0.0; FEATURE_LEN];
        for (k, p) in std::iter::once(&self.center)
            .chain(self.corners.iter())
            .enumerate()
        {
            let n = roi.normalize(p.bev()).point;
            out[3 * k] = n.x;
            out[3 * k + 1] = p.y;
            out[3 * k + 2] = n.z;
        }
        out[FEATURE_LEN - 1] = self.confidence;
        out
    }

    /// Rigidly moves the box; extents, yaw, class and confidence are kept.
    pub fn translated(&self, by: Point3) -> DetectionBox {
        DetectionBox {
            center: self.center + by,
            corners: self.corners.map(|c| c + by),
            class_id: self.class_id,
            confidence: self.confidence,
        }
    }
}
