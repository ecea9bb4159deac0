//! Flat key=value run configuration: file entries are defaults, command-line
//! flags overwrite them, and the merged, sorted listing is what gets hashed
//! into every artifact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pqlab::{Point, Shape};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Merged run settings. Keys are plain identifiers; values keep the exact
/// textual form they were supplied in so hashing is representation-stable.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("{}:{}: expected key=value", path.display(), lineno + 1));
            };
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RunConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError(format!("missing required setting `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| ConfigError(format!("bad number for `{key}`: {v}"))))
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| ConfigError(format!("missing required setting `{key}`")))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get(key)
            .map(|v| v.parse::<u64>().map_err(|_| ConfigError(format!("bad integer for `{key}`: {v}"))))
            .transpose()
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let list: Result<Vec<f64>, _> =
                    v.split(',').map(|t| t.trim().parse::<f64>()).collect();
                list.map(Some).map_err(|_| ConfigError(format!("bad number list for `{key}`: {v}")))
            }
        }
    }

    /// Canonical listing: sorted `key=value` lines. Hash input and the
    /// provenance block echoed into artifacts.
    /// Sorted key=value listing of the entries that shape the computation.
    /// Artifact placement keys stay out so reruns into different directories
    /// hash identically.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            if k == "out" || k == "formats" {
                continue;
            }
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn hash(&self) -> String {
        // FNV-1a over the canonical listing.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Shape grammar: `disk:R[@cx,cy]`, `square:S`, `rect:WxH`,
/// `lshape:S` (unit-style L with the upper-right quarter removed),
/// `polygon:x,y;x,y;...`.
pub fn parse_shape(spec: &str) -> Result<Shape, ConfigError> {
    let Some((kind, rest)) = spec.split_once(':') else {
        return err(format!("bad domain `{spec}`: expected kind:params"));
    };
    let num = |t: &str| -> Result<f64, ConfigError> {
        t.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad domain number `{t}` in `{spec}`")))
    };
    match kind {
        "disk" => {
            let (r_part, center) = match rest.split_once('@') {
                Some((r, c)) => {
                    let Some((cx, cy)) = c.split_once(',') else {
                        return err(format!("bad disk center in `{spec}`"));
                    };
                    (r, Point::new(num(cx)?, num(cy)?))
                }
                None => (rest, Point::new(0.0, 0.0)),
            };
            Ok(Shape::Disk { center, radius: num(r_part)? })
        }
        "square" => {
            let s = num(rest)?;
            Ok(Shape::Rectangle { min: Point::new(0.0, 0.0), max: Point::new(s, s) })
        }
        "rect" => {
            let Some((w, h)) = rest.split_once('x') else {
                return err(format!("bad rect `{spec}`: expected rect:WxH"));
            };
            Ok(Shape::Rectangle { min: Point::new(0.0, 0.0), max: Point::new(num(w)?, num(h)?) })
        }
        "lshape" => {
            let s = num(rest)?;
            Ok(Shape::LShape {
                min: Point::new(0.0, 0.0),
                max: Point::new(s, s),
                notch: Point::new(s / 2.0, s / 2.0),
            })
        }
        "polygon" => {
            let mut vertices = Vec::new();
            for pair in rest.split(';') {
                let Some((x, y)) = pair.split_once(',') else {
                    return err(format!("bad polygon vertex `{pair}` in `{spec}`"));
                };
                vertices.push(Point::new(num(x)?, num(y)?));
            }
            if vertices.len() < 3 {
                return err(format!("polygon needs at least 3 vertices in `{spec}`"));
            }
            Ok(Shape::Polygon { vertices })
        }
        other => err(format!("unknown domain kind `{other}`")),
    }
}
