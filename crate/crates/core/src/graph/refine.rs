use std::collections::{BTreeMap, VecDeque};

use super::{GraphPoint, MetricGraph, PointSet};
use crate::error::{Error, Result};
use crate::report::{CheckReport, Violation};

/// One piece of a parent edge after splitting at interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub parent: usize,
    /// Offsets on the parent edge covered by this piece.
    pub interval: (f64, f64),
}

/// The combinatorial graph obtained by promoting a point set to vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedGraph {
    nodes: PointSet,
    edges: Vec<RefinedEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RefinedGraph {
    pub fn nodes(&self) -> &PointSet {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[RefinedEdge] {
        &self.edges
    }

    /// `(neighbor, edge index)` pairs incident to `node`; a loop appears twice.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Number of refined edges between each unordered pair of distinct nodes.
    pub fn edge_multiplicities(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for e in &self.edges {
            let key = (e.a.min(e.b), e.a.max(e.b));
            *counts.entry(key).or_insert(0) += 1;
        }
        counts
    }

    /// Symmetric node adjacency ignoring loops and multiplicities.
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.node_count();
        let mut adj = vec![vec![false; n]; n];
        for e in &self.edges {
            if e.a != e.b {
                adj[e.a][e.b] = true;
                adj[e.b][e.a] = true;
            }
        }
        adj
    }

    fn reachable_avoiding(&self, start: usize, blocked: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.adjacency[x] {
                if !seen[y] && !blocked[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }
}

/// Split every edge of `graph` at the interior points of `points`. The node
/// set of the result is `points` together with all vertices.
pub fn refine(graph: &MetricGraph, points: &PointSet) -> Result<RefinedGraph> {
    for p in points.points() {
        graph.validate_point(p)?;
    }
    let nodes = graph.vertex_points().union(points);

    let mut interior: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for (idx, p) in nodes.points().iter().enumerate() {
        if let GraphPoint::Interior { edge, t } = *p {
            interior.entry(edge).or_default().push((t, idx));
        }
    }

    let mut edges = Vec::new();
    for e in graph.edges() {
        let start = nodes.index_of(&GraphPoint::Vertex(e.u)).unwrap();
        let end = nodes.index_of(&GraphPoint::Vertex(e.v)).unwrap();
        let mut prev = (0.0, start);
        // interior points arrive sorted by offset from the canonical ordering
        for &(t, idx) in interior.get(&e.id).map(Vec::as_slice).unwrap_or(&[]) {
            edges.push(RefinedEdge {
                a: prev.1,
                b: idx,
                length: t - prev.0,
                parent: e.id,
                interval: (prev.0, t),
            });
            prev = (t, idx);
        }
        edges.push(RefinedEdge {
            a: prev.1,
            b: end,
            length: e.length - prev.0,
            parent: e.id,
            interval: (prev.0, e.length),
        });
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a].push((e.b, k));
        adjacency[e.b].push((e.a, k));
    }
    Ok(RefinedGraph {
        nodes,
        edges,
        adjacency,
    })
}

/// A refined graph is admissible when no pair of nodes is joined by more than
/// one edge and no self-loop remains.
pub fn is_admissible(refined: &RefinedGraph) -> CheckReport {
    let mut report = CheckReport::new("admissibility")
        .with_param("nodes", refined.node_count())
        .with_param("edges", refined.edges().len());
    for ((a, b), count) in refined.edge_multiplicities() {
        if a == b {
            report.push(Violation::SelfLoop { node: a, count });
        } else if count > 1 {
            report.push(Violation::ParallelEdges { i: a, j: b, count });
        }
    }
    report.finish()
}

/// Smallest superset of `points` whose refinement is admissible: a midpoint
/// on every surplus parallel edge, and equal thirds on loops.
pub fn make_admissible(graph: &MetricGraph, points: &PointSet) -> Result<PointSet> {
    for p in points.points() {
        graph.validate_point(p)?;
    }
    let mut on_edge: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in points.points() {
        if let GraphPoint::Interior { edge, t } = *p {
            on_edge.entry(edge).or_default().push(t);
        }
    }

    let mut added = Vec::new();
    let mut direct: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for e in graph.edges() {
        let ts = on_edge.get(&e.id).map(Vec::as_slice).unwrap_or(&[]);
        if e.is_loop() {
            match ts {
                [] => {
                    added.push(GraphPoint::Interior { edge: e.id, t: e.length / 3.0 });
                    added.push(GraphPoint::Interior { edge: e.id, t: 2.0 * e.length / 3.0 });
                }
                [t] => {
                    let t = *t;
                    let mid = if t >= e.length - t { t / 2.0 } else { (t + e.length) / 2.0 };
                    added.push(GraphPoint::Interior { edge: e.id, t: mid });
                }
                _ => {}
            }
        } else if ts.is_empty() {
            direct.entry((e.u.min(e.v), e.u.max(e.v))).or_default().push(e.id);
        }
    }
    for mut ids in direct.into_values() {
        ids.sort_unstable();
        for &id in &ids[1..] {
            let len = graph.edge(id).unwrap().length;
            added.push(GraphPoint::Interior { edge: id, t: len / 2.0 });
        }
    }
    Ok(points.union(&PointSet::new(added)))
}

/// True iff every path from `t` to `s` in `refined` passes through `cut`.
pub fn separates(refined: &RefinedGraph, cut: &[usize], t: usize, s: usize) -> Result<bool> {
    let n = refined.node_count();
    if t >= n || s >= n {
        return Err(Error::BadIndex(format!("node index out of range (n = {n})")));
    }
    if t == s {
        return Err(Error::BadIndex("separation needs two distinct nodes".into()));
    }
    let mut blocked = vec![false; n];
    for &c in cut {
        if c >= n {
            return Err(Error::BadIndex(format!("cut node {c} out of range (n = {n})")));
        }
        blocked[c] = true;
    }
    if blocked[t] || blocked[s] {
        return Err(Error::BadIndex("separated nodes may not belong to the cut".into()));
    }
    Ok(!refined.reachable_avoiding(t, &blocked)[s])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, Edge, GraphFamily};
    use proptest::prelude::*;

    fn interval(len: f64) -> MetricGraph {
        MetricGraph::new(2, vec![Edge { id: 0, u: 0, v: 1, length: len }]).unwrap()
    }

    fn single_loop() -> MetricGraph {
        MetricGraph::new(1, vec![Edge { id: 0, u: 0, v: 0, length: 1.0 }]).unwrap()
    }

    fn tadpole() -> MetricGraph {
        generate_graph(&GraphFamily::Tadpole).unwrap()
    }

    #[test]
    fn midpoint_split() {
        let g = interval(1.0);
        let p = PointSet::new(vec![g.point(0, 0.5).unwrap()]);
        let r = refine(&g, &p).unwrap();
        assert_eq!(r.node_count(), 3);
        let lens: Vec<f64> = r.edges().iter().map(|e| e.length).collect();
        assert_eq!(lens, vec![0.5, 0.5]);
        assert_eq!(r.edges()[0].interval, (0.0, 0.5));
        assert_eq!(r.edges()[1].interval, (0.5, 1.0));
    }

    #[test]
    fn tadpole_at_vertices_is_combinatorial_tadpole() {
        let g = tadpole();
        let r = refine(&g, &g.vertex_points()).unwrap();
        assert_eq!(r.node_count(), 7);
        assert_eq!(r.edges().len(), 8);
        for (re, e) in r.edges().iter().zip(g.edges()) {
            assert_eq!((re.a, re.b, re.length), (e.u, e.v, e.length));
        }
        assert!(is_admissible(&r).pass);
    }

    #[test]
    fn loop_split_yields_parallel_pair() {
        let g = single_loop();
        let p = PointSet::new(vec![g.point(0, 0.3).unwrap()]);
        let r = refine(&g, &p).unwrap();
        assert_eq!(r.edges().len(), 2);
        assert_eq!((r.edges()[0].a, r.edges()[0].b), (0, 1));
        assert_eq!((r.edges()[1].a, r.edges()[1].b), (1, 0));
        assert!((r.edges()[0].length - 0.3).abs() < 1e-15);
        assert!((r.edges()[1].length - 0.7).abs() < 1e-15);

        let rep = is_admissible(&r);
        assert!(!rep.pass);
        assert_eq!(rep.violations, vec![Violation::ParallelEdges { i: 0, j: 1, count: 2 }]);
    }

    #[test]
    fn admissibility_of_loops() {
        let g = single_loop();
        let bare = is_admissible(&refine(&g, &PointSet::default()).unwrap());
        assert_eq!(bare.violations, vec![Violation::SelfLoop { node: 0, count: 1 }]);
        let p = PointSet::new(vec![g.point(0, 0.3).unwrap(), g.point(0, 0.6).unwrap()]);
        assert!(is_admissible(&refine(&g, &p).unwrap()).pass);
    }

    #[test]
    fn refine_rejects_bad_points() {
        let g = interval(1.0);
        let p = PointSet::new(vec![GraphPoint::Interior { edge: 0, t: 1.5 }]);
        assert!(matches!(refine(&g, &p), Err(Error::BadPoint(_))));
        let p = PointSet::new(vec![GraphPoint::Interior { edge: 0, t: 1.0 }]);
        assert!(matches!(refine(&g, &p), Err(Error::BadPoint(_))));
    }

    /// Exhaustive oracle: the fewest points, drawn from a grid of candidate
    /// offsets, whose addition makes the refinement admissible.
    fn min_additions_brute_force(g: &MetricGraph, base: &PointSet, max_extra: usize) -> usize {
        fn search(
            g: &MetricGraph,
            base: &PointSet,
            candidates: &[GraphPoint],
            chosen: &mut Vec<GraphPoint>,
            from: usize,
            size: usize,
        ) -> bool {
            if chosen.len() == size {
                let set = base.union(&PointSet::new(chosen.clone()));
                return is_admissible(&refine(g, &set).unwrap()).pass;
            }
            (from..candidates.len()).any(|k| {
                chosen.push(candidates[k]);
                let ok = search(g, base, candidates, chosen, k + 1, size);
                chosen.pop();
                ok
            })
        }
        let mut candidates = Vec::new();
        for e in g.edges() {
            for k in 1..6 {
                candidates.push(g.point(e.id, e.length * k as f64 / 6.0).unwrap());
            }
        }
        (0..=max_extra)
            .find(|&size| search(g, base, &candidates, &mut Vec::new(), 0, size))
            .expect("no admissible superset within budget")
    }

    #[test]
    fn make_admissible_parallel_edges_is_minimal() {
        let g = MetricGraph::new(
            2,
            vec![
                Edge { id: 0, u: 0, v: 1, length: 1.0 },
                Edge { id: 1, u: 0, v: 1, length: 1.0 },
            ],
        )
        .unwrap();
        let base = g.vertex_points();
        let fixed = make_admissible(&g, &base).unwrap();
        assert_eq!(fixed.len(), base.len() + 1);
        assert!(fixed.contains(&GraphPoint::Interior { edge: 1, t: 0.5 }));
        assert!(is_admissible(&refine(&g, &fixed).unwrap()).pass);
        assert_eq!(min_additions_brute_force(&g, &base, 3), 1);
    }

    #[test]
    fn make_admissible_loop_is_minimal() {
        let g = single_loop();
        let base = g.vertex_points();
        let fixed = make_admissible(&g, &base).unwrap();
        assert_eq!(fixed.len(), 3);
        assert!(is_admissible(&refine(&g, &fixed).unwrap()).pass);
        assert_eq!(min_additions_brute_force(&g, &base, 3), 2);

        let one = PointSet::new(vec![g.point(0, 0.3).unwrap()]);
        let fixed = make_admissible(&g, &one).unwrap();
        assert_eq!(fixed.len(), 2);
        assert!(fixed.contains(&GraphPoint::Interior { edge: 0, t: 0.65 }));
    }

    #[test]
    fn make_admissible_is_identity_on_admissible_input() {
        let g = tadpole();
        let p = g.vertex_points();
        assert_eq!(make_admissible(&g, &p).unwrap(), p);
    }

    #[test]
    fn tadpole_separation() {
        let g = tadpole();
        let r = refine(&g, &g.vertex_points()).unwrap();
        // vertices 0..=6, shared vertex 3
        assert!(separates(&r, &[3], 0, 4).unwrap());
        assert!(separates(&r, &[4, 6], 3, 5).unwrap());
        assert!(!separates(&r, &[4], 3, 5).unwrap());
        assert!(!separates(&r, &[], 0, 6).unwrap());
        assert!(separates(&r, &[3], 4, 4).is_err());
        assert!(separates(&r, &[3], 3, 4).is_err());
        assert!(separates(&r, &[], 0, 9).is_err());
    }

    /// Path-enumeration oracle for separation: every simple path from t to s
    /// must visit the cut.
    fn separates_by_paths(r: &RefinedGraph, cut: &[usize], t: usize, s: usize) -> bool {
        fn dfs(r: &RefinedGraph, cut: &[usize], x: usize, s: usize, seen: &mut Vec<bool>) -> bool {
            if x == s {
                return true;
            }
            seen[x] = true;
            let found = r.neighbors(x).iter().any(|&(y, _)| {
                !seen[y] && !cut.contains(&y) && dfs(r, cut, y, s, seen)
            });
            seen[x] = false;
            found
        }
        !dfs(r, cut, t, s, &mut vec![false; r.node_count()])
    }

    #[test]
    fn tadpole_separation_matches_path_enumeration() {
        let g = tadpole();
        let r = refine(&g, &g.vertex_points()).unwrap();
        for t in 0..7 {
            for s in 0..7 {
                if t == s {
                    continue;
                }
                let others: Vec<usize> = (0..7).filter(|&x| x != t && x != s).collect();
                for mask in 0u32..(1 << others.len()) {
                    let cut: Vec<usize> = others
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1)
                        .map(|(_, &x)| x)
                        .collect();
                    assert_eq!(
                        separates(&r, &cut, t, s).unwrap(),
                        separates_by_paths(&r, &cut, t, s)
                    );
                }
            }
        }
    }

    fn random_multigraph() -> impl Strategy<Value = (MetricGraph, Vec<(usize, f64)>)> {
        (1usize..7, proptest::collection::vec((0usize..64, 0usize..64, 0.1f64..3.0), 0..6), any::<u64>())
            .prop_flat_map(|(n, extra, seed)| {
                let tree = generate_graph(&GraphFamily::Tree {
                    vertices: n,
                    seed,
                    min_length: 0.5,
                    max_length: 2.0,
                })
                .unwrap();
                let mut edges = tree.edges().to_vec();
                for (k, &(a, b, len)) in extra.iter().enumerate() {
                    edges.push(Edge { id: 100 + k, u: a % n, v: b % n, length: len });
                }
                let g = MetricGraph::new(n, edges).unwrap();
                let m = g.edge_count();
                let pts = proptest::collection::vec((0..m.max(1), 0.01f64..0.99), if m == 0 { 0..1 } else { 0..8 });
                (Just(g), pts)
            })
    }

    fn to_points(g: &MetricGraph, raw: &[(usize, f64)]) -> PointSet {
        raw.iter()
            .map(|&(k, frac)| {
                let e = g.edges()[k];
                g.point(e.id, frac * e.length).unwrap()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn make_admissible_always_admissible((g, raw) in random_multigraph()) {
            let pts = to_points(&g, &raw);
            let fixed = make_admissible(&g, &pts).unwrap();
            prop_assert!(is_admissible(&refine(&g, &fixed).unwrap()).pass);
            prop_assert_eq!(make_admissible(&g, &fixed).unwrap(), fixed.clone());
            for p in pts.points() {
                prop_assert!(fixed.contains(p));
            }
        }

        #[test]
        fn refine_preserves_length((g, raw) in random_multigraph()) {
            let r = refine(&g, &to_points(&g, &raw)).unwrap();
            let total = g.total_length();
            prop_assert!((r.total_length() - total).abs() <= 1e-12 * total);
            for e in g.edges() {
                let sum: f64 = r.edges().iter().filter(|x| x.parent == e.id).map(|x| x.length).sum();
                prop_assert!((sum - e.length).abs() <= 1e-12 * e.length);
            }
        }
    }

    proptest! {
        #[test]
        fn separation_is_monotone((g, raw) in random_multigraph(), picks in proptest::collection::vec(any::<prop::sample::Index>(), 4)) {
            let r = refine(&g, &to_points(&g, &raw)).unwrap();
            let n = r.node_count();
            prop_assume!(n >= 3);
            let t = picks[0].index(n);
            let s = picks[1].index(n);
            prop_assume!(t != s);
            let others: Vec<usize> = (0..n).filter(|&x| x != t && x != s).collect();
            let small: Vec<usize> = others.iter().copied().filter(|x| x % 2 == picks[2].index(2)).collect();
            let mut big = small.clone();
            big.push(others[picks[3].index(others.len())]);
            if separates(&r, &small, t, s).unwrap() {
                prop_assert!(separates(&r, &big, t, s).unwrap());
            }
            prop_assert!(!separates(&r, &[], t, s).unwrap());
        }
    }
}
