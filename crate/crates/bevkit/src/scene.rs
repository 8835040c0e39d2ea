//! Scene annotations: one frame's ground truth and predictions, JSON
//! persistence with schema validation, and cross-reference checks.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bezier::Centerline;
use crate::error::{Error, Result};
use crate::metrics::{TopologyEdges, TrafficElement};

/// Ground truth and predictions for a single frame.
///
/// Centerline ids key the `*_centerlines` maps, traffic-element ids key the
/// `*_traffic_elements` maps; topology edges reference those ids. Ground
/// truth and prediction id spaces are independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub frame_id: String,
    pub gt_centerlines: BTreeMap<String, Centerline>,
    /// Lane -> lane edges over `gt_centerlines`.
    pub gt_topology_ll: TopologyEdges,
    pub gt_traffic_elements: BTreeMap<String, TrafficElement>,
    /// Lane -> traffic-element edges over `gt_centerlines` x `gt_traffic_elements`.
    pub gt_topology_lt: TopologyEdges,
    pub pred_centerlines: BTreeMap<String, Centerline>,
    pub pred_topology_ll: TopologyEdges,
    pub pred_traffic_elements: BTreeMap<String, TrafficElement>,
    pub pred_topology_lt: TopologyEdges,
}

impl SceneAnnotation {
    /// Empty scene with the given frame id.
    pub fn empty(frame_id: impl Into<String>) -> Self {
        SceneAnnotation {
            frame_id: frame_id.into(),
            gt_centerlines: BTreeMap::new(),
            gt_topology_ll: TopologyEdges::default(),
            gt_traffic_elements: BTreeMap::new(),
            gt_topology_lt: TopologyEdges::default(),
            pred_centerlines: BTreeMap::new(),
            pred_topology_ll: TopologyEdges::default(),
            pred_traffic_elements: BTreeMap::new(),
            pred_topology_lt: TopologyEdges::default(),
        }
    }

    /// Checks every invariant not already enforced by construction: traffic
    /// elements well formed, edge scores in [0, 1], no duplicate edges, and
    /// every edge endpoint resolving to an existing id. The first violation
    /// is reported with a JSON-pointer path into the scene document.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_prefix("")
    }

    /// Like [`validate`](Self::validate) but with `prefix` prepended to every
    /// pointer, so datasets can name the offending scene.
    pub fn validate_with_prefix(&self, prefix: &str) -> Result<()> {
        if self.frame_id.is_empty() {
            return Err(Error::Schema {
                pointer: format!("{prefix}/frame_id"),
                message: "frame_id must be non-empty".into(),
            });
        }
        for (field, elements) in [
            ("gt_traffic_elements", &self.gt_traffic_elements),
            ("pred_traffic_elements", &self.pred_traffic_elements),
        ] {
            for (id, te) in elements {
                te.validate().map_err(|e| Error::Schema {
                    pointer: format!("{prefix}/{field}/{id}"),
                    message: e.to_string(),
                })?;
            }
        }
        let lane_gt = &self.gt_centerlines;
        let lane_pred = &self.pred_centerlines;
        let checks: [(&str, &TopologyEdges, Endpoints, Endpoints); 4] = [
            (
                "gt_topology_ll",
                &self.gt_topology_ll,
                Endpoints::Lanes(lane_gt),
                Endpoints::Lanes(lane_gt),
            ),
            (
                "gt_topology_lt",
                &self.gt_topology_lt,
                Endpoints::Lanes(lane_gt),
                Endpoints::Traffic(&self.gt_traffic_elements),
            ),
            (
                "pred_topology_ll",
                &self.pred_topology_ll,
                Endpoints::Lanes(lane_pred),
                Endpoints::Lanes(lane_pred),
            ),
            (
                "pred_topology_lt",
                &self.pred_topology_lt,
                Endpoints::Lanes(lane_pred),
                Endpoints::Traffic(&self.pred_traffic_elements),
            ),
        ];
        for (field, edges, sources, targets) in checks {
            validate_edge_set(prefix, field, edges, &sources, &targets)?;
        }
        Ok(())
    }
}

enum Endpoints<'a> {
    Lanes(&'a BTreeMap<String, Centerline>),
    Traffic(&'a BTreeMap<String, TrafficElement>),
}

impl Endpoints<'_> {
    fn contains(&self, id: &str) -> bool {
        match self {
            Endpoints::Lanes(m) => m.contains_key(id),
            Endpoints::Traffic(m) => m.contains_key(id),
        }
    }
}

fn validate_edge_set(
    prefix: &str,
    field: &str,
    edges: &TopologyEdges,
    sources: &Endpoints<'_>,
    targets: &Endpoints<'_>,
) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for (idx, e) in edges.iter().enumerate() {
        if !e.score.is_finite() || !(0.0..=1.0).contains(&e.score) {
            return Err(Error::Schema {
                pointer: format!("{prefix}/{field}/{idx}/score"),
                message: format!("score must lie in [0, 1], got {}", e.score),
            });
        }
        if !seen.insert((e.source.as_str(), e.target.as_str())) {
            return Err(Error::Schema {
                pointer: format!("{prefix}/{field}/{idx}"),
                message: format!("duplicate edge ({} -> {})", e.source, e.target),
            });
        }
        for (endpoint, set) in [(&e.source, sources), (&e.target, targets)] {
            if !set.contains(endpoint) {
                return Err(Error::DanglingId {
                    pointer: format!("{prefix}/{field}/{idx}"),
                    edge_source: e.source.clone(),
                    edge_target: e.target.clone(),
                    missing: endpoint.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Writes the scene as pretty-printed JSON, atomically.
pub fn save_scene(scene: &SceneAnnotation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads and fully validates a scene. Syntax errors, schema violations and
/// dangling ids surface as distinct error kinds; schema violations carry a
/// JSON-pointer path to the offending value.
pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneAnnotation> {
    let text = fs::read_to_string(path)?;
    let scene = scene_from_json(&text)?;
    scene.validate()?;
    Ok(scene)
}

/// Parses a scene document without the cross-reference checks; used by
/// [`load_scene`] and by in-memory consumers of already-serialized scenes.
pub fn scene_from_json(text: &str) -> Result<SceneAnnotation> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let pointer = pointer_of(err.path());
        let inner = err.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => Error::Schema {
                pointer,
                message: strip_location(&inner.to_string()),
            },
            _ => Error::MalformedJson(inner),
        }
    })
}

/// Serde path -> JSON pointer ("/gt_centerlines/lane_0/confidence").
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

/// serde_json appends " at line L column C" to every message; the pointer
/// already locates the violation, so drop the suffix.
fn strip_location(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message.to_string(),
    }
}
