//! Text formats.
//!
//! Edge list (one network per file):
//!
//! ```text
//! # comment
//! nodes: a,b,c
//! a b 1.0
//! b c 0.25
//! ```
//!
//! Each unordered pair may appear at most once; isolated nodes are declared
//! in the header. Manifest (one dataset):
//!
//! ```text
//! # normalization: trace
//! path,label,x1
//! months/01.txt,1,1
//! months/02.txt,2,2
//! ```
//!
//! Paths are relative to the manifest's directory. Normalization is `trace`
//! (the default) or `none`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::laplacian::{laplacian_from_network, trace_normalize, WeightedNetwork};
use crate::regression::NetworkDataset;

/// Fixed float formatting used by every output file: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(k) => &line[..k],
        None => line,
    }
    .trim()
}

pub fn parse_network(text: &str, path: &Path) -> Result<WeightedNetwork> {
    let mut labels: Option<Vec<String>> = None;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let Some(labels) = labels.as_ref() else {
            let rest = line
                .strip_prefix("nodes:")
                .ok_or_else(|| Error::parse(path, lineno, "expected header `nodes: <labels>`"))?;
            let list: Vec<String> = rest.split(',').map(|s| s.trim().to_string()).collect();
            for (i, l) in list.iter().enumerate() {
                if l.is_empty() || l.contains(char::is_whitespace) {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("invalid node label {l:?}"),
                    ));
                }
                if index.insert(l.clone(), i).is_some() {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("duplicate node label {l:?}"),
                    ));
                }
            }
            labels = Some(list);
            continue;
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                "expected `<label> <label> <weight>`",
            ));
        }
        let node = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::parse(path, lineno, format!("unknown node label {s:?}")))
        };
        let (i, j) = (node(fields[0])?, node(fields[1])?);
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid weight {:?}", fields[2])))?;
        if !w.is_finite() {
            return Err(Error::parse(path, lineno, "non-finite weight"));
        }
        if w < 0.0 {
            return Err(Error::parse(path, lineno, format!("negative weight {w}")));
        }
        if i == j {
            return Err(Error::parse(
                path,
                lineno,
                format!("self-loop on {:?}", labels[i]),
            ));
        }
        let key = (i.min(j), i.max(j));
        if let Some(prev) = first_seen.insert(key, lineno) {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "duplicate edge {} {} (first given on line {prev})",
                    labels[key.0], labels[key.1]
                ),
            ));
        }
        edges.push((i, j, w));
    }
    let labels = labels.ok_or_else(|| Error::parse(path, 0, "missing `nodes:` header"))?;
    WeightedNetwork::from_edges(labels, &edges)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<WeightedNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, path)
}

pub fn format_network(net: &WeightedNetwork) -> String {
    let mut out = format!("nodes: {}\n", net.labels().join(","));
    for (i, j, w) in net.edges() {
        let _ = writeln!(
            out,
            "{} {} {}",
            net.labels()[i],
            net.labels()[j],
            fmt_f64(w)
        );
    }
    out
}

pub fn write_network(net: &WeightedNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_network(net)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Trace,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "trace" => Ok(Normalization::Trace),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub network_path: PathBuf,
    pub label: String,
    pub covariate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub normalization: Normalization,
    pub covariate_names: Vec<String>,
    /// Directory that relative network paths resolve against.
    pub base_dir: PathBuf,
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let mut normalization = Normalization::default();
    let mut covariate_names: Option<Vec<String>> = None;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("normalization:") {
                normalization = value
                    .parse()
                    .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let Some(names) = covariate_names.as_ref() else {
            if fields.len() < 3 || fields[0] != "path" || fields[1] != "label" {
                return Err(Error::parse(
                    path,
                    lineno,
                    "expected header `path,label,x1[,x2,...]`",
                ));
            }
            covariate_names = Some(fields[2..].iter().map(|s| s.to_string()).collect());
            continue;
        };
        if fields.len() != names.len() + 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected {} columns, found {}",
                    names.len() + 2,
                    fields.len()
                ),
            ));
        }
        let covariate = fields[2..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, lineno, format!("invalid covariate {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = fields[1].to_string();
        if label.is_empty() {
            return Err(Error::parse(path, lineno, "empty label"));
        }
        if entries.iter().any(|e| e.label == label) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate label {label:?}"),
            ));
        }
        entries.push(ManifestEntry {
            network_path: PathBuf::from(fields[0]),
            label,
            covariate,
        });
    }
    let covariate_names = covariate_names.ok_or_else(|| Error::parse(path, 0, "missing header"))?;
    if entries.is_empty() {
        return Err(Error::parse(path, 0, "manifest lists no networks"));
    }
    Ok(DatasetManifest {
        entries,
        normalization,
        covariate_names,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

/// A dataset together with what is needed to write and reproduce results.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: NetworkDataset,
    pub node_labels: Vec<String>,
    pub covariate_names: Vec<String>,
    pub normalization: Normalization,
    /// SHA-256 over the manifest bytes followed by every network file, in manifest order.
    pub digest: String,
}

/// Reorders `net` to the node order `reference`; the label sets must coincide.
pub fn align_network(
    net: WeightedNetwork,
    reference: &[String],
    path: &Path,
) -> Result<WeightedNetwork> {
    if net.labels() == reference {
        return Ok(net);
    }
    let mut sorted_a = net.labels().to_vec();
    let mut sorted_b = reference.to_vec();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(Error::parse(
            path,
            0,
            "node labels differ from the first network in the manifest",
        ));
    }
    let pos: HashMap<&str, usize> = reference
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let perm: Vec<usize> = net.labels().iter().map(|l| pos[l.as_str()]).collect();
    let m = reference.len();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            w[(perm[i], perm[j])] = net.weights()[(i, j)];
        }
    }
    WeightedNetwork::new(reference.to_vec(), w)
}

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest_bytes = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let text = String::from_utf8(manifest_bytes.clone())
        .map_err(|_| Error::parse(manifest_path, 0, "manifest is not UTF-8"))?;
    let manifest = parse_manifest(&text, manifest_path)?;

    let mut hasher = Sha256::new();
    hasher.update(&manifest_bytes);

    let mut reference: Option<Vec<String>> = None;
    let mut responses = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let path = manifest.base_dir.join(&entry.network_path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update(&bytes);
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(&path, 0, "network file is not UTF-8"))?;
        let net = parse_network(&text, &path)?;
        let net = match &reference {
            None => {
                reference = Some(net.labels().to_vec());
                net
            }
            Some(r) => align_network(net, r, &path)?,
        };
        let l = laplacian_from_network(&net);
        let l = match manifest.normalization {
            Normalization::Trace => {
                trace_normalize(&l).map_err(|e| Error::parse(&path, 0, e.to_string()))?
            }
            Normalization::None => l,
        };
        responses.push(l);
    }
    let dataset = NetworkDataset::with_labels(
        manifest
            .entries
            .iter()
            .map(|e| e.covariate.clone())
            .collect(),
        responses,
        manifest.entries.iter().map(|e| e.label.clone()).collect(),
    )?;
    Ok(LoadedDataset {
        dataset,
        node_labels: reference.unwrap_or_default(),
        covariate_names: manifest.covariate_names,
        normalization: manifest.normalization,
        digest: hex::encode(hasher.finalize()),
    })
}

/// Dense matrix, one row per line, space-separated.
pub fn format_matrix(mat: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols()).map(|j| fmt_f64(mat[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, k + 1, format!("invalid number {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(path, k + 1, "ragged matrix row"));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

/// Delimiter-separated table with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
