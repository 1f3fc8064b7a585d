//! On-disk formats: datasets and cached moment sets live in a directory of
//! `manifest.json` plus raw row-major little-endian f64 blobs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dct::Dictionary;
use crate::error::{Error, Result};
use crate::image::{Image, Kernel};
use crate::priors::{Dataset, KernelPrior, NoiseModel, ProblemInstance, SignalPrior};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    version: u32,
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    a: f64,
    beta: f64,
    b: f64,
    c_eps: f64,
    count: usize,
    base_seed: u64,
    atom_indices: Vec<(usize, usize)>,
    mu_alpha: Vec<f64>,
}

fn write_blob(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::MalformedFile(format!(
            "{}: expected {} bytes ({} f64), found {}",
            path.display(),
            expected_len * 8,
            expected_len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Write a dataset as `manifest.json` plus per-instance blobs
/// `inst<i>_{alpha,x,h,eps,y,sigma}.f64`.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = DatasetManifest {
        version: DATASET_FORMAT_VERSION,
        n: ds.signal.dict.side(),
        k: ds.signal.dict.atom_count(),
        d: ds.kernel.d,
        a: ds.kernel.a,
        beta: ds.kernel.beta,
        b: ds.signal.b,
        c_eps: ds.noise.c_eps,
        count: ds.instances.len(),
        base_seed: ds.base_seed,
        atom_indices: ds.signal.dict.atom_indices().to_vec(),
        mu_alpha: ds.signal.dict.mu_alpha().to_vec(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    for (i, inst) in ds.instances.iter().enumerate() {
        write_blob(&dir.join(format!("inst{i}_alpha.f64")), &inst.alpha)?;
        write_blob(&dir.join(format!("inst{i}_x.f64")), inst.x.as_slice())?;
        write_blob(&dir.join(format!("inst{i}_h.f64")), inst.h.as_slice())?;
        write_blob(&dir.join(format!("inst{i}_eps.f64")), inst.eps.as_slice())?;
        write_blob(&dir.join(format!("inst{i}_y.f64")), inst.y.as_slice())?;
        write_blob(&dir.join(format!("inst{i}_sigma.f64")), &[inst.sigma])?;
    }
    Ok(())
}

/// Load a dataset saved by [`save_dataset`]; the round trip is bit-exact.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let json = fs::read_to_string(&manifest_path)?;
    let manifest: DatasetManifest = serde_json::from_str(&json)
        .map_err(|e| Error::MalformedFile(format!("{}: {e}", manifest_path.display())))?;
    if manifest.version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch(format!(
            "dataset format version {} (supported: {DATASET_FORMAT_VERSION})",
            manifest.version
        )));
    }
    let dict = Dictionary::from_parts(manifest.n, manifest.atom_indices, manifest.mu_alpha)
        .map_err(|e| Error::MalformedFile(format!("manifest dictionary: {e}")))?;
    let signal = SignalPrior::new(dict, manifest.b)
        .map_err(|e| Error::MalformedFile(format!("manifest priors: {e}")))?;
    let kernel = KernelPrior::new(manifest.d, manifest.a, manifest.beta)
        .map_err(|e| Error::MalformedFile(format!("manifest priors: {e}")))?;
    let noise = NoiseModel::new(manifest.c_eps)
        .map_err(|e| Error::MalformedFile(format!("manifest priors: {e}")))?;

    let n = manifest.n;
    let d = manifest.d;
    let k = manifest.k;
    let mut instances = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let alpha = read_blob(&dir.join(format!("inst{i}_alpha.f64")), k)?;
        let x = Image::new(n, read_blob(&dir.join(format!("inst{i}_x.f64")), n * n)?)
            .map_err(|e| Error::MalformedFile(format!("inst{i}_x: {e}")))?;
        let h_data = read_blob(&dir.join(format!("inst{i}_h.f64")), d * d)?;
        let h = Kernel::new(d, h_data)
            .map_err(|e| Error::MalformedFile(format!("inst{i}_h: {e}")))?;
        let eps = Image::new(n, read_blob(&dir.join(format!("inst{i}_eps.f64")), n * n)?)
            .map_err(|e| Error::MalformedFile(format!("inst{i}_eps: {e}")))?;
        let y = Image::new(n, read_blob(&dir.join(format!("inst{i}_y.f64")), n * n)?)
            .map_err(|e| Error::MalformedFile(format!("inst{i}_y: {e}")))?;
        let sigma = read_blob(&dir.join(format!("inst{i}_sigma.f64")), 1)?[0];
        instances.push(ProblemInstance { alpha, x, sigma, h, eps, y });
    }
    Ok(Dataset {
        instances,
        signal,
        kernel,
        noise,
        base_seed: manifest.base_seed,
    })
}
