use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location on a metric graph in canonical form: endpoints of an edge are
/// always represented by their vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphPoint {
    Vertex(usize),
    Interior { edge: usize, t: f64 },
}

impl Eq for GraphPoint {}

impl Ord for GraphPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        use GraphPoint::*;
        match (self, other) {
            (Vertex(a), Vertex(b)) => a.cmp(b),
            (Vertex(_), Interior { .. }) => Ordering::Less,
            (Interior { .. }, Vertex(_)) => Ordering::Greater,
            (Interior { edge: e1, t: t1 }, Interior { edge: e2, t: t2 }) => {
                e1.cmp(e2).then(t1.total_cmp(t2))
            }
        }
    }
}

impl PartialOrd for GraphPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl GraphPoint {
    pub fn is_vertex(&self) -> bool {
        matches!(self, GraphPoint::Vertex(_))
    }
}

/// Labels are the vertex index, or `e<edge>:<offset>` with 17 significant digits.
impl fmt::Display for GraphPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphPoint::Vertex(v) => write!(f, "{v}"),
            GraphPoint::Interior { edge, t } => write!(f, "e{edge}:{t:.16e}"),
        }
    }
}

impl FromStr for GraphPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('e') {
            let (edge, t) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad point label {s:?}")))?;
            let edge = edge
                .parse()
                .map_err(|_| Error::Parse(format!("bad edge in label {s:?}")))?;
            let t: f64 = t
                .parse()
                .map_err(|_| Error::Parse(format!("bad offset in label {s:?}")))?;
            Ok(GraphPoint::Interior { edge, t })
        } else {
            s.parse()
                .map(GraphPoint::Vertex)
                .map_err(|_| Error::Parse(format!("bad point label {s:?}")))
        }
    }
}

/// JSON form of a point: `{"vertex": i}` or `{"edge": id, "t": offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PointSpec {
    Vertex { vertex: usize },
    Edge { edge: usize, t: f64 },
}

impl From<GraphPoint> for PointSpec {
    fn from(p: GraphPoint) -> Self {
        match p {
            GraphPoint::Vertex(vertex) => PointSpec::Vertex { vertex },
            GraphPoint::Interior { edge, t } => PointSpec::Edge { edge, t },
        }
    }
}

/// Sorted, duplicate-free sequence of canonical points. The order (vertices
/// by index, then interior points by edge and offset) fixes the row and
/// column order of every matrix built on the set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointSet {
    points: Vec<GraphPoint>,
}

impl PointSet {
    pub fn new(mut points: Vec<GraphPoint>) -> Self {
        points.sort();
        points.dedup();
        PointSet { points }
    }

    pub(crate) fn from_sorted_unchecked(points: Vec<GraphPoint>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        PointSet { points }
    }

    pub fn points(&self) -> &[GraphPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: &GraphPoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn contains(&self, p: &GraphPoint) -> bool {
        self.index_of(p).is_some()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut all = self.points.clone();
        all.extend_from_slice(&other.points);
        PointSet::new(all)
    }

    pub fn subset(&self, indices: &[usize]) -> PointSet {
        PointSet::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn labels(&self) -> Vec<String> {
        self.points.iter().map(|p| p.to_string()).collect()
    }

    pub fn to_specs(&self) -> Vec<PointSpec> {
        self.points.iter().map(|&p| p.into()).collect()
    }
}

impl FromIterator<GraphPoint> for PointSet {
    fn from_iter<I: IntoIterator<Item = GraphPoint>>(iter: I) -> Self {
        PointSet::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ordering_puts_vertices_first() {
        let set = PointSet::new(vec![
            GraphPoint::Interior { edge: 1, t: 0.2 },
            GraphPoint::Vertex(3),
            GraphPoint::Interior { edge: 0, t: 0.9 },
            GraphPoint::Vertex(0),
            GraphPoint::Interior { edge: 0, t: 0.1 },
            GraphPoint::Vertex(3),
        ]);
        assert_eq!(
            set.points(),
            &[
                GraphPoint::Vertex(0),
                GraphPoint::Vertex(3),
                GraphPoint::Interior { edge: 0, t: 0.1 },
                GraphPoint::Interior { edge: 0, t: 0.9 },
                GraphPoint::Interior { edge: 1, t: 0.2 },
            ]
        );
        assert_eq!(set.index_of(&GraphPoint::Vertex(3)), Some(1));
    }

    #[test]
    fn label_format() {
        assert_eq!(GraphPoint::Vertex(12).to_string(), "12");
        assert_eq!(
            GraphPoint::Interior { edge: 2, t: 0.5 }.to_string(),
            "e2:5.0000000000000000e-1"
        );
        assert!("e2".parse::<GraphPoint>().is_err());
        assert!("x".parse::<GraphPoint>().is_err());
    }

    proptest! {
        #[test]
        fn labels_round_trip(edge in 0usize..1000, t in 1e-9f64..1e3, v in 0usize..10_000) {
            let p = GraphPoint::Interior { edge, t };
            prop_assert_eq!(p.to_string().parse::<GraphPoint>().unwrap(), p);
            let q = GraphPoint::Vertex(v);
            prop_assert_eq!(q.to_string().parse::<GraphPoint>().unwrap(), q);
        }
    }
}
