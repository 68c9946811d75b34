//! Binary point records, JSON sidecars, and content hashing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::geom::Pt3;

/// Sidecar for raw point sets (little-endian f32 x,y,z records).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointSetSidecar {
    pub count: usize,
    pub frame: String,
    pub seed: u64,
    pub provenance: String,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

pub fn write_points_f32(path: impl AsRef<Path>, points: &[Pt3]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        for c in [p.x as f32, p.y as f32, p.z as f32] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_f32(path: impl AsRef<Path>) -> Result<Vec<Pt3>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(&path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 12 != 0 {
        return Err(CoreError::MalformedFile {
            path: path.as_ref().to_path_buf(),
            line: 0,
            message: format!("point file length {} is not a multiple of 12", bytes.len()),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 12);
    for rec in bytes.chunks_exact(12) {
        let x = f32::from_le_bytes(rec[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(rec[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(rec[8..12].try_into().unwrap());
        points.push(Pt3::new(f64::from(x), f64::from(y), f64::from(z)));
    }
    Ok(points)
}

/// Writes a point set together with its JSON sidecar (same stem, `.json`).
pub fn write_point_set(
    path: impl AsRef<Path>,
    points: &[Pt3],
    frame: &str,
    seed: u64,
    provenance: &str,
) -> Result<()> {
    let path = path.as_ref();
    write_points_f32(path, points)?;
    write_json(
        path.with_extension("json"),
        &PointSetSidecar {
            count: points.len(),
            frame: frame.to_string(),
            seed,
            provenance: provenance.to_string(),
        },
    )
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Hash of every regular file under `root`, keyed by relative path; the
/// pipeline determinism checks compare these across runs.
pub fn hash_tree(root: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let root = root.as_ref();
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for rel in files {
        let h = sha256_file(root.join(&rel))?;
        out.push((rel, h));
    }
    Ok(out)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("child of root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(rel);
        }
    }
    Ok(())
}
