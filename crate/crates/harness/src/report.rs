//! Artifact emission: report.json, tables/*.csv, plots/*.svg, manifest.json.
//! Everything written here is byte-deterministic given (config, seed); floats
//! are formatted with the shortest-roundtrip `Display`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        for sub in ["tables", "plots"] {
            fs::create_dir_all(root.join(sub))
                .map_err(|e| HarnessError::Io(format!("creating {}: {e}", root.display())))?;
        }
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn write_report<T: Serialize>(&self, report: &T) -> Result<(), HarnessError> {
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| HarnessError::Io(format!("serializing report: {e}")))?;
        self.write("report.json", format!("{json}\n").as_bytes())
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), HarnessError> {
        let mut out = String::new();
        writeln!(out, "{}", header.join(",")).unwrap();
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        self.write(&format!("tables/{name}.csv"), out.as_bytes())
    }

    pub fn write_svg(&self, name: &str, svg: &str) -> Result<(), HarnessError> {
        self.write(&format!("plots/{name}.svg"), svg.as_bytes())
    }

    /// Seeds, config hash and tool version — enough to reproduce the run.
    pub fn write_manifest(
        &self,
        kind: &str,
        seed: u64,
        config_bytes: &[u8],
        extra_seeds: &[(String, u64)],
    ) -> Result<(), HarnessError> {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let hash = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in hash {
            write!(hex, "{b:02x}").unwrap();
        }
        let manifest = serde_json::json!({
            "kind": kind,
            "seed": seed,
            "derived_seeds": extra_seeds
                .iter()
                .map(|(k, v)| serde_json::json!({"name": k, "seed": v}))
                .collect::<Vec<_>>(),
            "config_sha256": hex,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let json = serde_json::to_string_pretty(&manifest).unwrap();
        self.write("manifest.json", format!("{json}\n").as_bytes())
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        let path = self.root.join(rel);
        fs::write(&path, bytes)
            .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))
    }
}

/// Shortest-roundtrip decimal form; stable across platforms and runs.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Splitmix-style per-stage seed derivation from the master seed.
pub fn derive_seed(master: u64, stage: u64) -> u64 {
    master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stage.wrapping_add(1))
}
