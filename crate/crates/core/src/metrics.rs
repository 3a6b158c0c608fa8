//! Geodesic and resistance metrics between points of a metric graph.
//!
//! Query points are handled by refining the graph at them, so loops,
//! parallel edges and pairs on a common edge all go through the same code.
//! The resistance metric is the effective resistance of the refined graph
//! with each piece a resistor equal to its length. It is computed for every
//! connected metric graph; whether it yields valid isotropic covariances is
//! left to the model layer, which certifies positive-definiteness.

use nalgebra::DMatrix;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{refine, MetricGraph, PointSet, RefinedGraph};
use crate::linalg::{cholesky, DistanceMatrix, LabeledMatrix, MatrixKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Geodesic,
    Resistance,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Geodesic => "geodesic",
            Metric::Resistance => "resistance",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geodesic" => Ok(Metric::Geodesic),
            "resistance" => Ok(Metric::Resistance),
            other => Err(Error::BadParams(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn distance_matrix(graph: &MetricGraph, points: &PointSet, metric: Metric) -> Result<DistanceMatrix> {
    match metric {
        Metric::Geodesic => geodesic_matrix(graph, points),
        Metric::Resistance => resistance_matrix(graph, points),
    }
}

fn query_indices(refined: &RefinedGraph, points: &PointSet) -> Vec<usize> {
    points
        .points()
        .iter()
        .map(|p| refined.nodes().index_of(p).expect("query point is a refined node"))
        .collect()
}

/// Shortest-path distances between the points.
pub fn geodesic_matrix(graph: &MetricGraph, points: &PointSet) -> Result<DistanceMatrix> {
    let refined = refine(graph, points)?;
    let query = query_indices(&refined, points);

    let mut g = UnGraph::<(), f64>::with_capacity(refined.node_count(), refined.edges().len());
    for _ in 0..refined.node_count() {
        g.add_node(());
    }
    for e in refined.edges() {
        g.add_edge(NodeIndex::new(e.a), NodeIndex::new(e.b), e.length);
    }

    let rows: Vec<Vec<f64>> = query
        .par_iter()
        .map(|&src| {
            let dist = dijkstra(&g, NodeIndex::new(src), None, |e| *e.weight());
            query.iter().map(|&dst| dist[&NodeIndex::new(dst)]).collect()
        })
        .collect();
    let n = query.len();
    let entries = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rows[i][j] });
    Ok(LabeledMatrix::symmetrized(points.clone(), entries, MatrixKind::Distance))
}

/// Weighted Laplacian of the refined graph, conductance `1 / length` per
/// piece. Loops contribute nothing; parallel pieces add.
pub fn weighted_laplacian(refined: &RefinedGraph) -> DMatrix<f64> {
    let n = refined.node_count();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in refined.edges() {
        if e.a == e.b {
            continue;
        }
        let w = 1.0 / e.length;
        l[(e.a, e.a)] += w;
        l[(e.b, e.b)] += w;
        l[(e.a, e.b)] -= w;
        l[(e.b, e.a)] -= w;
    }
    l
}

/// Moore–Penrose pseudo-inverse of a connected graph Laplacian: invert the
/// system grounded at node 0, then project onto the complement of the
/// constant vector.
pub fn laplacian_pseudoinverse(laplacian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = laplacian.nrows();
    if n <= 1 {
        return Ok(DMatrix::zeros(n, n));
    }
    let reduced = laplacian.view((1, 1), (n - 1, n - 1)).into_owned();
    let l = cholesky(&reduced).map_err(|_| Error::SingularLaplacian)?;
    let mut grounded = DMatrix::<f64>::zeros(n, n);
    // columns of the reduced inverse via two triangular solves
    let w = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n - 1, n - 1))
        .ok_or(Error::SingularLaplacian)?;
    let inv = w.transpose() * w;
    grounded.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inv);

    let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let pinv = &centering * grounded * &centering;
    Ok((&pinv + pinv.transpose()) * 0.5)
}

/// Effective resistance between the points, `L⁺_ii + L⁺_jj − 2 L⁺_ij`.
pub fn resistance_matrix(graph: &MetricGraph, points: &PointSet) -> Result<DistanceMatrix> {
    let refined = refine(graph, points)?;
    let query = query_indices(&refined, points);
    let pinv = laplacian_pseudoinverse(&weighted_laplacian(&refined))?;
    let n = query.len();
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let (a, b) = (query[i], query[j]);
            (pinv[(a, a)] + pinv[(b, b)] - 2.0 * pinv[(a, b)]).max(0.0)
        }
    });
    Ok(LabeledMatrix::symmetrized(points.clone(), entries, MatrixKind::Distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, one_sum, Edge, GraphFamily, GraphPoint};
    use crate::linalg::max_abs;
    use proptest::prelude::*;

    fn tadpole() -> MetricGraph {
        generate_graph(&GraphFamily::Tadpole).unwrap()
    }

    /// Exhaustive simple-path enumeration on a combinatorial graph.
    fn shortest_by_enumeration(g: &MetricGraph, s: usize, t: usize) -> f64 {
        fn walk(g: &MetricGraph, x: usize, t: usize, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
            if x == t {
                *best = best.min(acc);
                return;
            }
            seen[x] = true;
            for e in g.edges() {
                let y = if e.u == x { e.v } else if e.v == x { e.u } else { continue };
                if !seen[y] {
                    walk(g, y, t, acc + e.length, seen, best);
                }
            }
            seen[x] = false;
        }
        let mut best = f64::INFINITY;
        walk(g, s, t, 0.0, &mut vec![false; g.vertex_count()], &mut best);
        best
    }

    #[test]
    fn tadpole_geodesics() {
        let g = tadpole();
        let d = geodesic_matrix(&g, &g.vertex_points()).unwrap();
        // vertices 0..=6, shared vertex 3
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(0, 3), 1.0);
        assert_eq!(d.get(0, 4), 2.0);
        assert_eq!(d.get(1, 5), 4.0);
        for i in 0..7 {
            for j in 0..7 {
                let want = if i == j { 0.0 } else { shortest_by_enumeration(&g, i, j) };
                assert_eq!(d.get(i, j), want);
            }
        }
    }

    #[test]
    fn same_edge_points() {
        let g = generate_graph(&GraphFamily::Cycle { vertices: 10, length: 1.0 }).unwrap();
        let p = PointSet::new(vec![g.point(3, 0.2).unwrap(), g.point(3, 0.9).unwrap()]);
        let d = geodesic_matrix(&g, &p).unwrap();
        assert!((d.get(0, 1) - 0.7).abs() < 1e-15);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.kind(), MatrixKind::Distance);
    }

    #[test]
    fn four_cycle_resistance() {
        let g = generate_graph(&GraphFamily::Cycle { vertices: 4, length: 1.0 }).unwrap();
        let r = resistance_matrix(&g, &g.vertex_points()).unwrap();
        // series-parallel: 1·3/(1+3) and 2·2/(2+2)
        assert!((r.get(0, 1) - 0.75).abs() < 1e-14);
        assert!((r.get(0, 2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tadpole_resistance_adds_across_shared_vertex() {
        let g = tadpole();
        let r = resistance_matrix(&g, &g.vertex_points()).unwrap();
        assert!((r.get(0, 4) - 1.5).abs() < 1e-14);
        assert!((r.get(1, 5) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pseudoinverse_identities() {
        let g = tadpole();
        let refined = refine(&g, &g.vertex_points()).unwrap();
        let l = weighted_laplacian(&refined);
        let p = laplacian_pseudoinverse(&l).unwrap();
        assert!(max_abs(&(&l * &p * &l - &l)) < 1e-12);
        assert!(max_abs(&(&p * &l * &p - &p)) < 1e-12);
        let row_sums = &p * DMatrix::from_element(7, 1, 1.0);
        assert!(max_abs(&row_sums) < 1e-12);
    }

    #[test]
    fn parallel_edges_and_loops() {
        // two parallel unit edges: resistance 1/2, geodesic 1; a loop changes neither
        let g = MetricGraph::new(
            2,
            vec![
                Edge { id: 0, u: 0, v: 1, length: 1.0 },
                Edge { id: 1, u: 0, v: 1, length: 1.0 },
                Edge { id: 2, u: 1, v: 1, length: 3.0 },
            ],
        )
        .unwrap();
        let pts = g.vertex_points().union(&PointSet::new(vec![g.point(2, 1.0).unwrap()]));
        let d = geodesic_matrix(&g, &pts).unwrap();
        let r = resistance_matrix(&g, &pts).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert!((r.get(0, 1) - 0.5).abs() < 1e-14);
        // loop point at offset 1 of a length-3 loop: geodesic 1, resistance 1·2/3
        assert_eq!(d.get(1, 2), 1.0);
        assert!((r.get(1, 2) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn single_vertex_graph() {
        let g = MetricGraph::new(1, vec![]).unwrap();
        let r = resistance_matrix(&g, &g.vertex_points()).unwrap();
        assert_eq!(r.dim(), 1);
        assert_eq!(r.get(0, 0), 0.0);
    }

    /// Random connected multigraph with random extra points on its edges.
    fn instance() -> impl Strategy<Value = (MetricGraph, PointSet, PointSet)> {
        (1usize..7, any::<u64>(), proptest::collection::vec((0usize..64, 0usize..64, 0.5f64..2.0), 0..5))
            .prop_flat_map(|(n, seed, extra)| {
                let tree = generate_graph(&GraphFamily::Tree { vertices: n, seed, min_length: 0.5, max_length: 2.0 }).unwrap();
                let mut edges = tree.edges().to_vec();
                for (k, &(a, b, len)) in extra.iter().enumerate() {
                    edges.push(Edge { id: 50 + k, u: a % n, v: b % n, length: len });
                }
                let g = MetricGraph::new(n, edges).unwrap();
                let m = g.edge_count();
                (
                    Just(g),
                    proptest::collection::vec((0..m.max(1), 0.05f64..0.95), 0..4),
                    proptest::collection::vec((0..m.max(1), 0.05f64..0.95), 0..4),
                )
            })
            .prop_map(|(g, a, b)| {
                let to_set = |raw: &[(usize, f64)]| -> PointSet {
                    if g.edge_count() == 0 {
                        return PointSet::default();
                    }
                    raw.iter()
                        .map(|&(k, f)| {
                            let e = g.edges()[k];
                            g.point(e.id, f * e.length).unwrap()
                        })
                        .collect()
                };
                let base = g.vertex_points().union(&to_set(&a));
                let extra = to_set(&b);
                (g, base, extra)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metric_axioms((g, pts, _) in instance()) {
            for metric in [Metric::Geodesic, Metric::Resistance] {
                let d = distance_matrix(&g, &pts, metric).unwrap();
                let n = d.dim();
                for i in 0..n {
                    prop_assert_eq!(d.get(i, i), 0.0);
                    for j in 0..n {
                        prop_assert_eq!(d.get(i, j), d.get(j, i));
                        if i != j {
                            prop_assert!(d.get(i, j) > 0.0);
                        }
                        for k in 0..n {
                            prop_assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-10);
                        }
                    }
                }
            }
        }

        #[test]
        fn refinement_invariance_and_domination((g, pts, extra) in instance()) {
            let geo = geodesic_matrix(&g, &pts).unwrap();
            let res = resistance_matrix(&g, &pts).unwrap();
            let finer = pts.union(&extra);
            let geo2 = geodesic_matrix(&g, &finer).unwrap();
            let res2 = resistance_matrix(&g, &finer).unwrap();
            let idx: Vec<usize> = pts.points().iter().map(|p| finer.index_of(p).unwrap()).collect();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    prop_assert!((geo.get(a, b) - geo2.get(i, j)).abs() <= 1e-10);
                    prop_assert!((res.get(a, b) - res2.get(i, j)).abs() <= 1e-10);
                    prop_assert!(res.get(a, b) <= geo.get(a, b) + 1e-10);
                }
            }
        }

        #[test]
        fn trees_have_equal_metrics(n in 1usize..12, seed: u64, fracs in proptest::collection::vec(0.05f64..0.95, 0..5)) {
            let g = generate_graph(&GraphFamily::Tree { vertices: n, seed, min_length: 0.5, max_length: 2.0 }).unwrap();
            let mut pts = g.vertex_points();
            if g.edge_count() > 0 {
                let extra: PointSet = fracs.iter().enumerate().map(|(k, f)| {
                    let e = g.edges()[k % g.edge_count()];
                    g.point(e.id, f * e.length).unwrap()
                }).collect();
                pts = pts.union(&extra);
            }
            let geo = geodesic_matrix(&g, &pts).unwrap();
            let res = resistance_matrix(&g, &pts).unwrap();
            prop_assert!(max_abs(&(geo.entries() - res.entries())) <= 1e-10);
        }

        #[test]
        fn one_sum_distances_add(n1 in 2usize..6, n2 in 2usize..6, s1: u64, s2: u64, f1 in 0.1f64..0.9, f2 in 0.1f64..0.9) {
            let t1 = generate_graph(&GraphFamily::Tree { vertices: n1, seed: s1, min_length: 0.5, max_length: 2.0 }).unwrap();
            let c2 = generate_graph(&GraphFamily::Cycle { vertices: n2, length: 1.3 }).unwrap();
            let left = one_sum(&t1, &c2, 0, 0).unwrap();
            let right = generate_graph(&GraphFamily::Cycle { vertices: 3, length: 0.8 }).unwrap();
            let g = one_sum(&left, &right, 0, 1).unwrap();
            let shift = left.edges().iter().map(|e| e.id + 1).max().unwrap();
            let ea = left.edges()[left.edge_count() - 1];
            let a = g.point(ea.id, f1 * ea.length).unwrap();
            let b = g.point(shift, f2 * 0.8).unwrap();
            let cut = GraphPoint::Vertex(0);
            let pts = PointSet::new(vec![a, b, cut]);
            let (ia, ib, iv) = (pts.index_of(&a).unwrap(), pts.index_of(&b).unwrap(), pts.index_of(&cut).unwrap());
            for metric in [Metric::Geodesic, Metric::Resistance] {
                let d = distance_matrix(&g, &pts, metric).unwrap();
                prop_assert!((d.get(ia, ib) - d.get(ia, iv) - d.get(iv, ib)).abs() <= 1e-10);
            }
        }
    }
}
