//! Artifact writers. Every file carries the artifact version and the run
//! configuration hash; CSV numbers are printed with 17 significant digits so
//! they round-trip exactly and reruns are byte-comparable.

use std::io::Write;
use std::path::{Path, PathBuf};

use pqlab::ARTIFACT_VERSION;
use serde_json::{json, Value};

use crate::config::ConfigError;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Emitter {
    dir: PathBuf,
    config_hash: String,
    canonical: String,
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
    pub field: bool,
}

impl Emitter {
    pub fn new(
        dir: &Path,
        config_hash: &str,
        canonical: &str,
        formats: Option<&str>,
    ) -> Result<Emitter, ConfigError> {
        let mut e = Emitter {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            canonical: canonical.to_string(),
            json: formats.is_none(),
            csv: formats.is_none(),
            svg: formats.is_none(),
            field: formats.is_none(),
        };
        if let Some(spec) = formats {
            for token in spec.split(',') {
                match token.trim() {
                    "json" => e.json = true,
                    "csv" => e.csv = true,
                    "svg" => e.svg = true,
                    "field" => e.field = true,
                    other => return Err(ConfigError(format!("unknown format `{other}`"))),
                }
            }
        }
        std::fs::create_dir_all(dir)
            .map_err(|err| ConfigError(format!("cannot create {}: {err}", dir.display())))?;
        Ok(e)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// JSON artifact: a fixed envelope around the body. serde_json maps are
    /// sorted, so output bytes depend only on the values.
    pub fn write_json(&self, name: &str, command: &str, body: Value) -> Result<(), ConfigError> {
        if !self.json {
            return Ok(());
        }
        let doc = json!({
            "artifact_version": ARTIFACT_VERSION,
            "config_hash": self.config_hash,
            "command": command,
            "report": body,
        });
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| ConfigError(format!("serialization failed: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    /// CSV artifact: two provenance comment lines, a header, then rows.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), ConfigError> {
        if !self.csv {
            return Ok(());
        }
        let path = self.path(name);
        let file = std::fs::File::create(&path)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        let do_write = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
            writeln!(w, "# artifact_version={ARTIFACT_VERSION}")?;
            writeln!(w, "# config_hash={}", self.config_hash)?;
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                writeln!(w, "{}", row.join(","))?;
            }
            w.flush()
        };
        do_write(&mut w).map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    /// The effective configuration itself, for provenance.
    pub fn write_run_listing(&self) -> Result<(), ConfigError> {
        let path = self.path("run.config");
        let body = format!(
            "# artifact_version={ARTIFACT_VERSION}\n# config_hash={}\n{}",
            self.config_hash, self.canonical
        );
        std::fs::write(&path, body)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn write_field(&self, name: &str, u: &pqlab::ScalarField) -> Result<(), ConfigError> {
        if !self.field {
            return Ok(());
        }
        let path = self.path(name);
        pqlab::write_field_tagged(&path, u, Some(&self.config_hash))
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn write_svg(&self, name: &str, u: &pqlab::ScalarField) -> Result<(), ConfigError> {
        if !self.svg {
            return Ok(());
        }
        let path = self.path(name);
        let body = crate::svg::render_field(u, &self.config_hash);
        std::fs::write(&path, body)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Iteration trace rows in the fixed (iter, energy, nehari_residual, step)
/// column order.
pub fn trace_rows(trace: &[pqlab::TraceRow]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|t| {
            vec![t.iter.to_string(), fmt17(t.energy), fmt17(t.nehari_residual), fmt17(t.step)]
        })
        .collect()
}
