use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::DatasetSpec;
use crate::error::{Error, Result};
use crate::net::Batch;
use crate::tensor::Tensor;

pub fn load_dataset(spec: &DatasetSpec) -> Result<Batch> {
    match spec {
        DatasetSpec::Synthetic { clusters, dim, n, seed, spread } => synthetic(*clusters, *dim, *n, *seed, *spread),
        DatasetSpec::Csv { path, label } => load_csv(path, label),
        DatasetSpec::Idx { images, labels, limit } => load_idx(images, labels, *limit),
    }
}

/// `n` points, labels cycling through `0..clusters`, each drawn from
/// `N(center_label, spread² I)` with unit-norm random centers.
pub fn synthetic(clusters: usize, dim: usize, n: usize, seed: u64, spread: f64) -> Result<Batch> {
    if clusters == 0 || dim == 0 {
        return Err(Error::InvalidArgument("synthetic data needs clusters and dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| {
            let c: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            c.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    let mut x = Vec::with_capacity(n * dim);
    for &l in &labels {
        x.extend(centers[l].iter().map(|c| c + spread * unit.sample(&mut rng)));
    }
    Batch::new(Tensor::matrix(n, dim, x), labels)
}

/// Header row, numeric feature columns and an integer label column.
pub fn load_csv(path: &Path, label: &str) -> Result<Batch> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == label)
        .ok_or_else(|| Error::Config(format!("{}: no column named {label:?}", path.display())))?;
    let dim = headers.len() - 1;
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str, field: &str| Error::Config(format!("{}: row {}: bad {what} {field:?}", path.display(), row + 2));
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if j == label_col {
                labels.push(field.parse::<usize>().map_err(|_| bad("label", field))?);
            } else {
                x.push(field.parse::<f64>().map_err(|_| bad("value", field))?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    }
    Batch::new(Tensor::matrix(labels.len(), dim, x), labels)
}

fn read_idx(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Config(format!("{}: {msg}", path.display()));
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(bad("not an IDX file"));
    }
    if bytes[2] != 0x08 {
        return Err(bad("only unsigned byte IDX data is supported"));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize)
        .collect();
    let count: usize = dims.iter().product();
    if bytes.len() != header + count {
        return Err(bad(&format!("expected {count} data bytes, found {}", bytes.len() - header)));
    }
    Ok((dims, bytes[header..].to_vec()))
}

/// IDX images (`[n, ...]`, flattened and scaled to `[0, 1]`) and labels.
pub fn load_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Batch> {
    let (idims, pixels) = read_idx(images)?;
    let (ldims, lab) = read_idx(labels)?;
    if idims.is_empty() || ldims.len() != 1 || idims[0] != ldims[0] {
        return Err(Error::Config(format!(
            "IDX image dims {idims:?} and label dims {ldims:?} do not match"
        )));
    }
    let n = limit.unwrap_or(idims[0]).min(idims[0]);
    let dim: usize = idims[1..].iter().product();
    let x = pixels[..n * dim].iter().map(|&p| p as f64 / 255.0).collect();
    Batch::new(Tensor::matrix(n, dim, x), lab[..n].iter().map(|&l| l as usize).collect())
}

/// Encode an unsigned-byte IDX file.
pub fn write_idx(path: &Path, dims: &[usize], data: &[u8]) -> Result<()> {
    let mut bytes = vec![0, 0, 0x08, dims.len() as u8];
    for &d in dims {
        bytes.extend_from_slice(&(d as u32).to_be_bytes());
    }
    bytes.extend_from_slice(data);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
