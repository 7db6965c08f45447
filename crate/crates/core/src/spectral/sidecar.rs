//! Binary sidecar for a spectral cache.
//!
//! Layout: the 8-byte magic `NRVSPEC1`, a little-endian `u64` header length,
//! a JSON header, then the `n × p` eigenvector matrix as little-endian
//! `f64` values in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SpectralCache;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NRVSPEC1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    n: usize,
    p: usize,
    eigvals: Vec<f64>,
    residual_norms: Vec<f64>,
    inner_product_weights: Option<Vec<f64>>,
}

pub fn write_sidecar(path: &Path, cache: &SpectralCache) -> Result<()> {
    let header = Header {
        format: "spectral-cache/1".into(),
        n: cache.n(),
        p: cache.p(),
        eigvals: cache.eigvals.clone(),
        residual_norms: cache.residual_norms.clone(),
        inner_product_weights: cache.weights.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for x in cache.eigvecs.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<SpectralCache> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{} is not a spectral cache sidecar", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json)?;
    if h.eigvals.len() != h.p {
        return Err(Error::Data("sidecar header eigenvalue count disagrees with p".into()));
    }
    let mut data = vec![0.0; h.n * h.p];
    let mut buf = [0u8; 8];
    for x in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *x = f64::from_le_bytes(buf);
    }
    Ok(SpectralCache {
        eigvals: h.eigvals,
        eigvecs: DMatrix::from_vec(h.n, h.p, data),
        weights: h.inner_product_weights,
        residual_norms: h.residual_norms,
    })
}
