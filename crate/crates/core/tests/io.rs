mod common;

use std::fs;

use proptest::prelude::*;

use common::*;
use netreg::io::{format_network, load_dataset, load_network, parse_network, write_network};
use netreg::{Error, WeightedNetwork};

#[test]
fn header_and_one_edge() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    fs::write(&path, "nodes: a,b,c\na b 1.0\n").unwrap();
    let net = load_network(&path).unwrap();
    assert_eq!(net.node_count(), 3);
    assert_eq!(net.edges(), vec![(0, 1, 1.0)]);
    assert_eq!(net.weights()[(1, 0)], 1.0);
}

#[test]
fn self_loop_is_rejected() {
    let err = parse_network("nodes: a,b,c\na a 1.0\n", "g.txt".as_ref()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    assert!(err.to_string().contains("self-loop"));
}

#[test]
fn symmetrized_duplicate_is_rejected_with_line() {
    let err = parse_network("nodes: a,b,c\na b 1\nb a 2\n", "g.txt".as_ref()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    assert!(err.to_string().contains("duplicate edge"));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_network("/nonexistent/graph.txt").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

fn network_strategy() -> impl Strategy<Value = WeightedNetwork> {
    (1usize..9, any::<u64>()).prop_map(|(m, seed)| {
        let mut r = rng(seed);
        let mut net = random_network(&mut r, m, 0.5);
        // awkward magnitudes exercise the float formatting
        let w = net
            .weights()
            .map(|x| if x > 0.0 { x * 1e-7 + x.powi(9) } else { 0.0 });
        net = WeightedNetwork::new(net.labels().to_vec(), w).unwrap();
        net
    })
}

proptest! {
    #[test]
    fn write_then_load_is_exact(net in network_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        write_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(format_network(&back), format_network(&net));
    }
}

fn monthly(dir: &std::path::Path, n: usize, m: usize, norm: &str) -> std::path::PathBuf {
    let mut r = rng(7);
    let nets = trend_networks(&mut r, n, m, &[]);
    let covs: Vec<Vec<f64>> = (1..=n).map(|k| vec![k as f64]).collect();
    write_fixture(dir, &covs, &nets, norm)
}

#[test]
fn thirty_six_months() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = monthly(dir.path(), 36, 5, "trace");
    let loaded = load_dataset(&manifest).unwrap();
    assert_eq!(loaded.dataset.len(), 36);
    assert_eq!(loaded.node_labels, labels(5));
    for l in loaded.dataset.responses() {
        assert!((l.trace() - 1.0).abs() < 1e-12);
    }
    let covs: Vec<f64> = loaded.dataset.covariates().iter().map(|x| x[0]).collect();
    assert_eq!(covs, (1..=36).map(|k| k as f64).collect::<Vec<_>>());
    assert_eq!(loaded.digest.len(), 64);
}

#[test]
fn normalization_none_keeps_weights() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = monthly(dir.path(), 3, 4, "none");
    let loaded = load_dataset(&manifest).unwrap();
    assert!(loaded
        .dataset
        .responses()
        .iter()
        .any(|l| (l.trace() - 1.0).abs() > 1e-3));
}

#[test]
fn single_entry() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = monthly(dir.path(), 1, 3, "trace");
    assert_eq!(load_dataset(&manifest).unwrap().dataset.len(), 1);
}

#[test]
fn different_node_lists_fail() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "nodes: a,b\na b 1\n").unwrap();
    fs::write(dir.path().join("b.txt"), "nodes: a,c\na c 1\n").unwrap();
    fs::write(
        dir.path().join("m.csv"),
        "path,label,x\na.txt,1,1\nb.txt,2,2\n",
    )
    .unwrap();
    let err = load_dataset(dir.path().join("m.csv")).unwrap_err();
    assert!(err.to_string().contains("node labels differ"), "{err}");
}

#[test]
fn reordered_node_lists_are_aligned() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "nodes: a,b,c\na b 1\nb c 2\n").unwrap();
    fs::write(dir.path().join("b.txt"), "nodes: c,b,a\na b 1\nb c 2\n").unwrap();
    fs::write(
        dir.path().join("m.csv"),
        "# normalization: none\npath,label,x\na.txt,1,1\nb.txt,2,2\n",
    )
    .unwrap();
    let d = load_dataset(dir.path().join("m.csv")).unwrap().dataset;
    assert_eq!(d.responses()[0], d.responses()[1]);
}

#[test]
fn unreadable_entry_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), "path,label,x\nmissing.txt,1,1\n").unwrap();
    let err = load_dataset(dir.path().join("m.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}

#[test]
fn empty_network_cannot_be_trace_normalized() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "nodes: a,b\n").unwrap();
    fs::write(dir.path().join("m.csv"), "path,label,x\na.txt,1,1\n").unwrap();
    assert!(load_dataset(dir.path().join("m.csv")).is_err());
}

#[test]
fn manifest_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(3);
    let nets = trend_networks(&mut r, 4, 4, &[]);
    let covs = vec![vec![3.0], vec![1.0], vec![4.0], vec![2.0]];
    let manifest = write_fixture(dir.path(), &covs, &nets, "trace");
    let d = load_dataset(&manifest).unwrap().dataset;
    let xs: Vec<f64> = d.covariates().iter().map(|x| x[0]).collect();
    assert_eq!(xs, vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(d.labels(), &["2", "4", "1", "3"]);
}
