//! JSON file formats.
//!
//! Every file carries `"version": "1"`. Unknown fields are rejected, and
//! parse errors name the file, the format version and the line and column.
//! Numbers are written in their shortest round-trip form, so reading a file
//! back yields bit-identical values.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::em_fit::{EmConfig, EmState};
use crate::error::{Error, Result};
use crate::geometry::{BezierCurve, LaneGraph, RegionOfInterest, Vec2};
use crate::losses::{LogitMatrix, LossReport};
use crate::matching::GraphMatch;
use crate::matrix::Matrix;
use crate::membership::MembershipMatrix;
use crate::metrics::EvalReport;
use crate::objects::{DetectionBox, Point3};
use crate::pipeline::{DescentStep, LabelBundle};
use crate::scenegen::Scene;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    /// Three `[x, z]` control points per curve, meters.
    pub curves: Vec<[[f64; 2]; 3]>,
    /// Directed `[from, to]` edges.
    pub incidence: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence: Option<Vec<f64>>,
}

impl GraphJson {
    pub fn from_graph(graph: &LaneGraph) -> Self {
        GraphJson {
            curves: graph
                .curves()
                .iter()
                .map(|c| c.control_points().map(<[f64; 2]>::from))
                .collect(),
            incidence: graph.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            existence: graph.existence().map(<[f64]>::to_vec),
        }
    }

    pub fn to_graph(&self) -> Result<LaneGraph> {
        let curves = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, pts)| {
                BezierCurve::from_control_points(pts.map(Vec2::from))
                    .map_err(|e| Error::InvalidInput(format!("curve {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let edges: Vec<(usize, usize)> = self.incidence.iter().map(|&[a, b]| (a, b)).collect();
        LaneGraph::with_edges(curves, &edges, self.existence.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectJson {
    pub center: [f64; 3],
    /// Bottom face counter-clockwise, then the top face.
    pub corners: [[f64; 3]; 8],
    pub class_id: u32,
    pub confidence: f64,
}

impl ObjectJson {
    pub fn from_box(b: &DetectionBox) -> Self {
        ObjectJson {
            center: b.center().into(),
            corners: b.corners().map(<[f64; 3]>::from),
            class_id: b.class_id(),
            confidence: b.confidence(),
        }
    }

    pub fn to_box(&self) -> Result<DetectionBox> {
        DetectionBox::new(
            self.center.into(),
            self.corners.map(Point3::from),
            self.class_id,
            self.confidence,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: String,
    pub roi: RegionOfInterest,
    pub graph: GraphJson,
    pub objects: Vec<ObjectJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_membership: Option<Vec<Vec<f64>>>,
}

/// Contents of a scene file after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScene {
    pub roi: RegionOfInterest,
    pub graph: LaneGraph,
    pub objects: Vec<DetectionBox>,
    pub gen_membership: Option<MembershipMatrix>,
}

impl SceneFile {
    pub fn from_scene(scene: &Scene) -> Self {
        SceneFile {
            version: FORMAT_VERSION.into(),
            roi: scene.roi,
            graph: GraphJson::from_graph(&scene.gt_graph),
            objects: scene.objects.iter().map(ObjectJson::from_box).collect(),
            gen_membership: Some(scene.gen_membership.as_matrix().to_rows()),
        }
    }

    pub fn load(&self) -> Result<LoadedScene> {
        check_version(&self.version)?;
        self.roi.validate()?;
        let graph = self.graph.to_graph()?;
        let objects = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                o.to_box()
                    .map_err(|e| Error::InvalidInput(format!("object {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let gen_membership = match &self.gen_membership {
            Some(rows) => {
                let m = MembershipMatrix::from_rows(rows, graph.len() + 1)?;
                if m.n_objects() != objects.len() {
                    return Err(Error::Shape(format!(
                        "gen_membership has {} rows for {} objects",
                        m.n_objects(),
                        objects.len()
                    )));
                }
                Some(m)
            }
            None => None,
        };
        Ok(LoadedScene {
            roi: self.roi,
            graph,
            objects,
            gen_membership,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<RegionOfInterest>,
    pub graph: GraphJson,
}

impl GraphFile {
    pub fn new(graph: &LaneGraph, roi: Option<RegionOfInterest>) -> Self {
        GraphFile {
            version: FORMAT_VERSION.into(),
            roi,
            graph: GraphJson::from_graph(graph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub version: String,
    pub roi: RegionOfInterest,
    pub config: EmConfig,
    pub graph: GraphJson,
    pub mixing: Vec<f64>,
    pub responsibilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub monotonicity_violations: usize,
}

impl FitFile {
    pub fn new(state: &EmState, config: &EmConfig, roi: RegionOfInterest) -> Self {
        FitFile {
            version: FORMAT_VERSION.into(),
            roi,
            config: config.clone(),
            graph: GraphJson::from_graph(&LaneGraph::from_curves(state.curves.clone())),
            mixing: state.mixing.clone(),
            responsibilities: state.responsibilities.as_matrix().to_rows(),
            labels: state.responsibilities.labels(),
            log_likelihood: state.log_likelihood,
            iterations: state.iterations,
            converged: state.converged,
            monotonicity_violations: state.monotonicity_violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitsFile {
    pub version: String,
    /// One row per object, one column per estimated curve plus the outlier set.
    pub logits: Vec<Vec<f64>>,
}

impl LogitsFile {
    pub fn to_logits(&self, cols: usize) -> Result<LogitMatrix> {
        check_version(&self.version)?;
        LogitMatrix::new(Matrix::from_rows(&self.logits, cols)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipFile {
    pub version: String,
    pub membership: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl MembershipFile {
    pub fn new(m: &MembershipMatrix) -> Self {
        MembershipFile {
            version: FORMAT_VERSION.into(),
            membership: m.as_matrix().to_rows(),
            labels: m.labels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchJson {
    /// Matched true curve of each estimated curve, `null` if unmatched.
    pub est_to_gt: Vec<Option<usize>>,
    pub gt_to_est: Vec<Option<usize>>,
    /// `[estimated, true]` outlier column indices.
    pub outlier_pair: [usize; 2],
}

impl MatchJson {
    pub fn new(m: &GraphMatch) -> Self {
        let (e, g) = m.outlier_pair();
        MatchJson {
            est_to_gt: m.est_to_gt().to_vec(),
            gt_to_est: m.gt_to_est().to_vec(),
            outlier_pair: [e, g],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchFile {
    pub version: String,
    #[serde(rename = "match")]
    pub graph_match: MatchJson,
    /// Matching cost between every estimated (row) and true (column) curve.
    pub cost: Vec<Vec<f64>>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleFile {
    pub version: String,
    pub z_star: Vec<Vec<f64>>,
    pub z_bar: Vec<Vec<f64>>,
    #[serde(rename = "match")]
    pub graph_match: MatchJson,
    pub losses: LossReport,
}

impl BundleFile {
    pub fn new(b: &LabelBundle) -> Self {
        BundleFile {
            version: FORMAT_VERSION.into(),
            z_star: b.z_star.as_matrix().to_rows(),
            z_bar: b.z_bar.as_matrix().to_rows(),
            graph_match: MatchJson::new(&b.graph_match),
            losses: b.losses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentFile {
    pub version: String,
    pub graph: GraphJson,
    #[serde(rename = "match")]
    pub graph_match: MatchJson,
    pub trace: Vec<DescentStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalFile {
    pub version: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

fn check_version(v: &str) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "unsupported format version {v:?} (this build reads version {FORMAT_VERSION})"
        )))
    }
}

/// Parses `text` as `T`, labelling errors with `what`.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("{what} (format version {FORMAT_VERSION}): {e}")))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_scene(path: &Path) -> Result<LoadedScene> {
    read_json::<SceneFile>(path)?.load()
}

/// Reads a lane graph from a graph, fit or scene file, told apart by their
/// top-level keys. Returns the region stored in the file, if any.
pub fn read_graph(path: &Path) -> Result<(LaneGraph, Option<RegionOfInterest>)> {
    let text = read_text(path)?;
    let what = path.display().to_string();
    let value: serde_json::Value = parse_json(&text, &what)?;
    let has = |key: &str| value.get(key).is_some();
    if has("objects") {
        let scene = parse_json::<SceneFile>(&text, &what)?.load()?;
        Ok((scene.graph, Some(scene.roi)))
    } else if has("trace") {
        let descent: DescentFile = parse_json(&text, &what)?;
        check_version(&descent.version)?;
        Ok((descent.graph.to_graph()?, None))
    } else if has("mixing") {
        let fit: FitFile = parse_json(&text, &what)?;
        check_version(&fit.version)?;
        Ok((fit.graph.to_graph()?, Some(fit.roi)))
    } else {
        let file: GraphFile = parse_json(&text, &what)?;
        check_version(&file.version)?;
        if let Some(roi) = &file.roi {
            roi.validate()?;
        }
        Ok((file.graph.to_graph()?, file.roi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{generate_scene, Pattern, SceneSpec};

    fn scene() -> Scene {
        generate_scene(&SceneSpec {
            pattern: Pattern::Mixed,
            n_lanes: 4,
            n_outliers: 3,
            seed: 5,
            ..SceneSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn scene_round_trip_is_exact() {
        let s = scene();
        let file = SceneFile::from_scene(&s);
        let text = to_json(&file).unwrap();
        let back: SceneFile = parse_json(&text, "scene").unwrap();
        assert_eq!(back, file);
        assert_eq!(to_json(&back).unwrap(), text);
        let loaded = back.load().unwrap();
        assert_eq!(loaded.graph, s.gt_graph);
        assert_eq!(loaded.objects, s.objects);
        assert_eq!(loaded.gen_membership.unwrap(), s.gen_membership);
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_version() {
        let mut v = serde_json::to_value(SceneFile::from_scene(&scene())).unwrap();
        v["colour"] = "red".into();
        let err = parse_json::<SceneFile>(&v.to_string(), "scene.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("format version 1"), "{err}");
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn malformed_json_reports_the_line() {
        let err = parse_json::<SceneFile>("{\n  \"version\": \"1\",\n  oops\n}", "scene.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut file = SceneFile::from_scene(&scene());
        file.version = "2".into();
        assert!(file.load().unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn graph_loader_accepts_every_graph_bearing_file() {
        let s = scene();
        let dir = tempfile::tempdir().unwrap();
        let scene_path = dir.path().join("scene.json");
        let graph_path = dir.path().join("graph.json");
        write_json(&scene_path, &SceneFile::from_scene(&s)).unwrap();
        write_json(&graph_path, &GraphFile::new(&s.gt_graph, None)).unwrap();
        assert_eq!(read_graph(&scene_path).unwrap().0, s.gt_graph);
        assert_eq!(read_graph(&graph_path).unwrap(), (s.gt_graph.clone(), None));

        let points: Vec<Vec2> = s.objects.iter().map(|b| b.bev_center()).collect();
        let cfg = EmConfig::new(2, 1.0);
        let state = crate::em_fit::fit(&points, &cfg).unwrap();
        let fit_path = dir.path().join("fit.json");
        write_json(&fit_path, &FitFile::new(&state, &cfg, s.roi)).unwrap();
        assert_eq!(read_graph(&fit_path).unwrap().0.curves(), &state.curves[..]);

        let descent = DescentFile {
            version: FORMAT_VERSION.into(),
            graph: GraphJson::from_graph(&s.gt_graph),
            graph_match: MatchJson::new(&crate::matching::GraphMatch::identity(s.gt_graph.len())),
            trace: vec![],
        };
        let descent_path = dir.path().join("descent.json");
        write_json(&descent_path, &descent).unwrap();
        assert_eq!(read_graph(&descent_path).unwrap(), (s.gt_graph.clone(), None));
    }

    #[test]
    fn bad_geometry_is_reported_per_item() {
        let mut file = SceneFile::from_scene(&scene());
        file.objects[1].center[0] += 1.0;
        assert!(file.load().unwrap_err().to_string().contains("object 1"));
        let mut file = SceneFile::from_scene(&scene());
        file.graph.incidence.push([0, 9]);
        assert!(file.load().is_err());
    }
}
