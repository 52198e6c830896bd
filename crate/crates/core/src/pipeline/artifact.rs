//! Output files: atomic writes and the seed/config stamp every artifact
//! carries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Provenance written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_digest: String,
}

impl Stamp {
    pub fn comment(&self) -> String {
        format!("seed={} config_digest={}", self.seed, self.config_digest)
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// A CSV table with string cells; the stamp columns are appended on output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, stamp: &Stamp) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.header.clone();
        header.extend(["seed".to_string(), "config_digest".to_string()]);
        w.write_record(&header)?;
        let seed = stamp.seed.to_string();
        for row in &self.rows {
            w.write_record(row.iter().chain([&seed, &stamp.config_digest]))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Formats a float for output; NaN and infinities as `NA`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    seed: u64,
    config_digest: &'a str,
    #[serde(flatten)]
    data: &'a T,
}

/// Pretty JSON object with the stamp fields first; `data` must serialize as
/// an object.
pub fn stamped_json<T: Serialize>(data: &T, stamp: &Stamp) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Stamped {
        seed: stamp.seed,
        config_digest: &stamp.config_digest,
        data,
    })?;
    out.push(b'\n');
    Ok(out)
}
