#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netreg::io::write_network;
use netreg::{laplacian_from_network, GraphLaplacian, NetworkDataset, WeightedNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("v{i}")).collect()
}

/// Random network: each pair is an edge with probability `density`, weight in (0, 2].
pub fn random_network(rng: &mut impl Rng, m: usize, density: f64) -> WeightedNetwork {
    let mut edges = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.random::<f64>() < density {
                edges.push((i, j, 2.0 * (1.0 - rng.random::<f64>())));
            }
        }
    }
    WeightedNetwork::from_edges(labels(m), &edges).unwrap()
}

pub fn random_laplacian(rng: &mut impl Rng, m: usize) -> GraphLaplacian {
    let density = rng.random_range(0.3..1.0);
    laplacian_from_network(&random_network(rng, m, density))
}

pub fn random_dataset(rng: &mut impl Rng, n: usize, m: usize, p: usize) -> NetworkDataset {
    let covariates = (0..n)
        .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
        .collect();
    let responses = (0..n).map(|_| random_laplacian(rng, m)).collect();
    NetworkDataset::new(covariates, responses).unwrap()
}

pub fn random_symmetric(rng: &mut impl Rng, m: usize, scale: f64) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = scale * (2.0 * rng.random::<f64>() - 1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Networks drifting smoothly with the index, with heavier noise at `spikes` (0-based).
pub fn trend_networks(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    spikes: &[usize],
) -> Vec<WeightedNetwork> {
    let base: Vec<(usize, usize, f64)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.random::<f64>()))
        .collect();
    (0..n)
        .map(|t| {
            let s = t as f64 / n.max(2) as f64;
            let edges: Vec<(usize, usize, f64)> = base
                .iter()
                .map(|&(i, j, b)| {
                    let smooth = 1.0 + (std::f64::consts::PI * (s + b)).sin().powi(2) * b;
                    let noise = 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
                    let mut w = smooth * noise;
                    if spikes.contains(&t) && (i + j + t) % 3 == 0 {
                        w *= 8.0;
                    }
                    (i, j, w)
                })
                .collect();
            WeightedNetwork::from_edges(labels(m), &edges).unwrap()
        })
        .collect()
}

/// Writes networks plus a manifest with covariate `x` and labels `1..n`.
pub fn write_fixture(
    dir: &Path,
    covariates: &[Vec<f64>],
    networks: &[WeightedNetwork],
    normalization: &str,
) -> PathBuf {
    fs::create_dir_all(dir.join("nets")).unwrap();
    let p = covariates[0].len();
    let mut manifest = format!("# normalization: {normalization}\npath,label");
    for d in 1..=p {
        manifest.push_str(&format!(",x{d}"));
    }
    manifest.push('\n');
    for (k, (x, net)) in covariates.iter().zip(networks).enumerate() {
        let rel = format!("nets/{:03}.txt", k + 1);
        write_network(net, dir.join(&rel)).unwrap();
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        manifest.push_str(&format!("{rel},{},{}\n", k + 1, xs.join(",")));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).unwrap();
    path
}

/// Every file below `dir`, relative path and contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
