use metric_gmrf::csvio::{read_matrix, write_matrix};
use metric_gmrf::graph::{make_admissible, refine, GraphPoint};
use metric_gmrf::linalg::invert_spd;
use metric_gmrf::markov::{check_mtp2, markov_consistency, model_covariance, verify_faithfulness, ModelSpec};
use metric_gmrf::metrics::{distance_matrix, Metric};
use metric_gmrf::models::ExpKernelParams;
use metric_gmrf::{Error, MatrixKind, MetricGraph};

const STAR: &str = r#"{"vertices": 4, "edges": [
    {"id": 0, "from": 0, "to": 1, "length": 1.0},
    {"id": 1, "from": 0, "to": 2, "length": 0.5},
    {"id": 2, "from": 3, "to": 0, "length": 2.0}
]}"#;

#[test]
fn json_to_checks_on_a_star() {
    let g = MetricGraph::from_json(STAR).unwrap();
    let pts = g.points_from_json(r#"[{"edge": 2, "t": 0.5}, {"vertex": 1}]"#).unwrap();
    let pts = g.vertex_points().union(&pts);
    assert_eq!(pts.len(), 5);
    // offsets run from the `from` vertex, so this point is 1.5 from the hub
    let p = GraphPoint::Interior { edge: 2, t: 0.5 };
    let d = distance_matrix(&g, &pts, Metric::Geodesic).unwrap();
    let (hub, k) = (pts.index_of(&GraphPoint::Vertex(0)).unwrap(), pts.index_of(&p).unwrap());
    assert!((d.get(hub, k) - 1.5).abs() < 1e-15);

    let text = write_matrix(&d).unwrap();
    assert_eq!(read_matrix(&text, MatrixKind::Distance).unwrap(), d);

    let model = ModelSpec::Exp { metric: Metric::Resistance, params: ExpKernelParams::new(0.9, 2.0).unwrap() };
    let (refined, sigma) = model_covariance(&g, &model, &pts).unwrap();
    assert!(check_mtp2(&invert_spd(&sigma).unwrap(), 1e-8).pass);
    assert!(markov_consistency(&sigma, &refined, 1e-8).unwrap().pass);
    assert!(verify_faithfulness(&sigma, &refined, 1e-7, 0, 0).unwrap().pass);
}

#[test]
fn multigraph_needs_admissible_points() {
    let g = MetricGraph::from_json(
        r#"{"vertices": 2, "edges": [
            {"id": 0, "from": 0, "to": 1, "length": 1.0},
            {"id": 1, "from": 1, "to": 0, "length": 2.0},
            {"id": 2, "from": 1, "to": 1, "length": 1.5}
        ]}"#,
    )
    .unwrap();
    let bare = g.vertex_points();
    let model = ModelSpec::Exp { metric: Metric::Geodesic, params: ExpKernelParams::new(1.0, 1.0).unwrap() };
    let (refined, sigma) = model_covariance(&g, &model, &bare).unwrap();
    assert!(matches!(markov_consistency(&sigma, &refined, 1e-8), Err(Error::NotAdmissible(_))));

    let fixed = make_admissible(&g, &bare).unwrap();
    assert_eq!(fixed.len(), 5);
    let refined = refine(&g, &fixed).unwrap();
    assert_eq!(refined.node_count(), 5);
    assert!(metric_gmrf::graph::is_admissible(&refined).pass);
}
