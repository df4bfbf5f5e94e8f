//! Object-to-centerline clustering on Bezier lane graphs.
//!
//! Road objects are assigned to the lane centerlines they drive on. The crate
//! provides the membership rule, Hungarian matching between estimated and true
//! lane graphs, the clustering and lane-graph losses, an EM fit of centerlines
//! to object centers, lane-graph metrics, a synthetic scene generator and the
//! `objlane` command-line tool.
//!
//! ```
//! use objlane::em_fit::{fit, EmConfig};
//! use objlane::geometry::Vec2;
//! use objlane::metrics::evaluate;
//! use objlane::geometry::{LaneGraph, RegionOfInterest};
//! use objlane::scenegen::{generate_scene, SceneSpec};
//!
//! let scene = generate_scene(&SceneSpec::default()).unwrap();
//! let points: Vec<Vec2> = scene.objects.iter().map(|b| b.bev_center()).collect();
//! let state = fit(&points, &EmConfig::new(3, 1.0)).unwrap();
//! let est = LaneGraph::from_curves(state.curves);
//! let report = evaluate(&est, &scene.gt_graph, &RegionOfInterest::default()).unwrap();
//! assert_eq!(report.detect, 1.0);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod em_fit;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod matching;
pub mod matrix;
pub mod membership;
pub mod metrics;
pub mod objects;
pub mod pipeline;
pub mod scenegen;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/lane-graphs.md")]
    mod lane_graphs {}
    #[doc = include_str!("../../../book/src/membership.md")]
    mod membership {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/em.md")]
    mod em {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
