use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, MetricGraph};
use crate::error::{Error, Result};

/// Graph families available from [`generate_graph`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFamily {
    /// `edges` edges in a row, `edges + 1` vertices.
    Path { edges: usize, length: f64 },
    /// `vertices` vertices on a ring; 1 gives a loop, 2 a pair of parallel edges.
    Cycle { vertices: usize, length: f64 },
    /// Random recursive tree with lengths uniform in `[min_length, max_length]`.
    Tree {
        vertices: usize,
        seed: u64,
        min_length: f64,
        max_length: f64,
    },
    /// Two unit 4-cycles sharing one vertex: vertices 0..=6, shared vertex 3.
    Tadpole,
    /// `rows` x `cols` grid with common edge length.
    Lattice { rows: usize, cols: usize, length: f64 },
}

fn check_length(length: f64) -> Result<()> {
    if length.is_finite() && length > 0.0 {
        Ok(())
    } else {
        Err(Error::BadParams(format!("edge length must be positive, got {length}")))
    }
}

fn check_size(name: &str, n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::BadParams(format!("{name} must be at least 1")))
    }
}

fn numbered(pairs: impl IntoIterator<Item = (usize, usize, f64)>) -> Vec<Edge> {
    pairs
        .into_iter()
        .enumerate()
        .map(|(id, (u, v, length))| Edge { id, u, v, length })
        .collect()
}

pub fn generate_graph(family: &GraphFamily) -> Result<MetricGraph> {
    match *family {
        GraphFamily::Path { edges, length } => {
            check_size("edges", edges)?;
            check_length(length)?;
            MetricGraph::new(edges + 1, numbered((0..edges).map(|i| (i, i + 1, length))))
        }
        GraphFamily::Cycle { vertices, length } => {
            check_size("vertices", vertices)?;
            check_length(length)?;
            MetricGraph::new(
                vertices,
                numbered((0..vertices).map(|i| (i, (i + 1) % vertices, length))),
            )
        }
        GraphFamily::Tree {
            vertices,
            seed,
            min_length,
            max_length,
        } => {
            check_size("vertices", vertices)?;
            check_length(min_length)?;
            check_length(max_length)?;
            if min_length > max_length {
                return Err(Error::BadParams(format!(
                    "min_length {min_length} exceeds max_length {max_length}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<_> = (1..vertices)
                .map(|v| {
                    let parent = rng.random_range(0..v);
                    let len = if min_length == max_length {
                        min_length
                    } else {
                        rng.random_range(min_length..max_length)
                    };
                    (parent, v, len)
                })
                .collect();
            MetricGraph::new(vertices, numbered(edges))
        }
        GraphFamily::Tadpole => {
            let left = generate_graph(&GraphFamily::Cycle { vertices: 4, length: 1.0 })?;
            one_sum(&left, &left, 3, 0)
        }
        GraphFamily::Lattice { rows, cols, length } => {
            check_size("rows", rows)?;
            check_size("cols", cols)?;
            check_length(length)?;
            let at = |r: usize, c: usize| r * cols + c;
            let mut pairs = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        pairs.push((at(r, c), at(r, c + 1), length));
                    }
                    if r + 1 < rows {
                        pairs.push((at(r, c), at(r + 1, c), length));
                    }
                }
            }
            MetricGraph::new(rows * cols, numbered(pairs))
        }
    }
}

/// Glue `g2` onto `g1` by identifying vertex `v2` of `g2` with vertex `v1` of
/// `g1`. Vertices of `g1` keep their indices; the remaining vertices of `g2`
/// follow in order. Edge ids of `g2` are shifted past the largest id of `g1`.
pub fn one_sum(g1: &MetricGraph, g2: &MetricGraph, v1: usize, v2: usize) -> Result<MetricGraph> {
    if v1 >= g1.vertex_count() {
        return Err(Error::BadIndex(format!("glue vertex {v1} not in first graph")));
    }
    if v2 >= g2.vertex_count() {
        return Err(Error::BadIndex(format!("glue vertex {v2} not in second graph")));
    }
    let n1 = g1.vertex_count();
    let map = |k: usize| match k.cmp(&v2) {
        std::cmp::Ordering::Equal => v1,
        std::cmp::Ordering::Less => n1 + k,
        std::cmp::Ordering::Greater => n1 + k - 1,
    };
    let id_shift = g1.edges().iter().map(|e| e.id + 1).max().unwrap_or(0);
    let mut edges = g1.edges().to_vec();
    edges.extend(g2.edges().iter().map(|e| Edge {
        id: e.id + id_shift,
        u: map(e.u),
        v: map(e.v),
        length: e.length,
    }));
    MetricGraph::new(n1 + g2.vertex_count() - 1, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn endpoint_set(g: &MetricGraph) -> Vec<(usize, usize, u64)> {
        let mut v: Vec<_> = g
            .edges()
            .iter()
            .map(|e| (e.u.min(e.v), e.u.max(e.v), e.length.to_bits()))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn cycle_of_four() {
        let g = generate_graph(&GraphFamily::Cycle { vertices: 4, length: 1.0 }).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().iter().all(|e| e.length == 1.0));
        assert_eq!(g.degrees(), vec![2; 4]);
    }

    #[test]
    fn tadpole_matches_figure() {
        let g = generate_graph(&GraphFamily::Tadpole).unwrap();
        assert_eq!(g.vertex_count(), 7);
        assert_eq!(g.edge_count(), 8);
        let expected = [(0, 1), (1, 2), (2, 3), (0, 3), (3, 4), (4, 5), (5, 6), (3, 6)];
        let mut want: Vec<_> = expected.iter().map(|&(a, b)| (a, b, 1f64.to_bits())).collect();
        want.sort_unstable();
        assert_eq!(endpoint_set(&g), want);
    }

    #[test]
    fn tree_is_deterministic() {
        let fam = GraphFamily::Tree { vertices: 10, seed: 7, min_length: 0.5, max_length: 2.0 };
        let a = generate_graph(&fam).unwrap();
        let b = generate_graph(&fam).unwrap();
        assert_eq!(a, b);
        assert!(a.is_tree());
        assert!(a.edges().iter().all(|e| (0.5..2.0).contains(&e.length)));
    }

    #[test]
    fn lattice_counts() {
        let g = generate_graph(&GraphFamily::Lattice { rows: 3, cols: 4, length: 0.5 }).unwrap();
        assert_eq!(g.vertex_count(), 12);
        assert_eq!(g.edge_count(), 3 * 3 + 2 * 4);
    }

    #[test]
    fn bad_params() {
        assert!(matches!(
            generate_graph(&GraphFamily::Path { edges: 0, length: 1.0 }),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            generate_graph(&GraphFamily::Cycle { vertices: 3, length: -1.0 }),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            generate_graph(&GraphFamily::Tree { vertices: 3, seed: 0, min_length: 2.0, max_length: 1.0 }),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn one_sum_of_cycles_is_tadpole() {
        let c4 = generate_graph(&GraphFamily::Cycle { vertices: 4, length: 1.0 }).unwrap();
        let glued = one_sum(&c4, &c4, 3, 0).unwrap();
        let tadpole = generate_graph(&GraphFamily::Tadpole).unwrap();
        assert_eq!(endpoint_set(&glued), endpoint_set(&tadpole));
    }

    #[test]
    fn one_sum_of_edges_is_path() {
        let e = generate_graph(&GraphFamily::Path { edges: 1, length: 1.0 }).unwrap();
        let p2 = one_sum(&e, &e, 1, 0).unwrap();
        assert_eq!(
            endpoint_set(&p2),
            endpoint_set(&generate_graph(&GraphFamily::Path { edges: 2, length: 1.0 }).unwrap())
        );
        let mut acc = e.clone();
        for k in 1..6 {
            acc = one_sum(&acc, &e, k, 0).unwrap();
        }
        assert_eq!(
            endpoint_set(&acc),
            endpoint_set(&generate_graph(&GraphFamily::Path { edges: 6, length: 1.0 }).unwrap())
        );
        assert!(matches!(one_sum(&e, &e, 2, 0), Err(Error::BadIndex(_))));
        assert!(matches!(one_sum(&e, &e, 0, 5), Err(Error::BadIndex(_))));
    }

    proptest! {
        #[test]
        fn one_sum_counts(n1 in 1usize..8, n2 in 1usize..8, s1: u64, s2: u64, a in 0usize..8, b in 0usize..8, loops in 0usize..3) {
            let g1 = generate_graph(&GraphFamily::Tree { vertices: n1, seed: s1, min_length: 0.5, max_length: 2.0 }).unwrap();
            let mut g2 = generate_graph(&GraphFamily::Cycle { vertices: n2, length: 1.0 }).unwrap();
            for _ in 0..loops {
                g2 = one_sum(&g2, &generate_graph(&GraphFamily::Cycle { vertices: 1, length: 0.7 }).unwrap(), 0, 0).unwrap();
            }
            let v1 = a % n1;
            let v2 = b % n2;
            let s = one_sum(&g1, &g2, v1, v2).unwrap();
            prop_assert_eq!(s.vertex_count(), g1.vertex_count() + g2.vertex_count() - 1);
            prop_assert_eq!(s.edge_count(), g1.edge_count() + g2.edge_count());
        }
    }
}
