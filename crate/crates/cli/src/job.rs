use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strapkit::freq::SweepSpec;
use strapkit::imagecore::Manifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("style manifest contains no tiles")]
    EmptyStyleSource,
    #[error("bad radius list `{0}`: {1}")]
    BadRangeSyntax(String, String),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Effective configuration of one run, written as `config.json` next to the
/// outputs before any processing starts.
#[derive(Debug, Serialize)]
pub struct JobConfig<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub workers: usize,
    pub params: &'a P,
}

impl<'a, P: Serialize> JobConfig<'a, P> {
    pub fn new(command: &'a str, workers: usize, params: &'a P) -> Self {
        Self {
            tool: "strapkit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            workers,
            params,
        }
    }
}

/// What a command produced. Hard errors make the process exit non-zero;
/// warnings do not.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outcome {
    pub processed: usize,
    pub written: usize,
    pub warnings: usize,
    pub hard_errors: usize,
    pub wall_seconds: f64,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.hard_errors == 0
    }
}

pub fn prepare_out_dir<P: Serialize>(out: &Path, config: &JobConfig<'_, P>) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let body = serde_json::to_string_pretty(config)? + "\n";
    write_atomic(&out.join("config.json"), body.as_bytes())
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_sorted_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let mut m = strapkit::imagecore::load_manifest(path)?;
    m.sort_by_tile_id();
    Ok(m)
}

pub fn tiles_dir(out: &Path) -> anyhow::Result<PathBuf> {
    let dir = out.join("tiles");
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Two-column CSV of `tile_id` and a message, rows in the given order.
pub fn write_tile_messages(path: &Path, header: &str, rows: &[(String, String)]) -> anyhow::Result<()> {
    let mut out = format!("tile_id,{header}\n");
    for (id, msg) in rows {
        out.push_str(&csv_field(id));
        out.push(',');
        out.push_str(&csv_field(msg));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parses a comma-separated radius list or a `start:stop:step` range.
pub fn parse_radii(text: &str) -> Result<SweepSpec, CliError> {
    let bad = |why: &str| CliError::BadRangeSyntax(text.to_string(), why.to_string());
    let number = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("`{}` is not a number", s.trim())))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad("radii must be positive"));
        }
        Ok(v)
    };
    let text_t = text.trim();
    if text_t.is_empty() {
        return Err(bad("empty"));
    }
    if text_t.contains(':') {
        let parts: Vec<&str> = text_t.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if stop < start {
            return Err(bad("stop is below start"));
        }
        return SweepSpec::range(start, stop, step).map_err(|e| bad(&e.to_string()));
    }
    let radii = text_t.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
    SweepSpec::new(radii).map_err(|e| bad(&e.to_string()))
}

pub fn thread_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_syntax() {
        assert_eq!(parse_radii("84").unwrap().radii(), [84.0]);
        assert_eq!(parse_radii("14:154:14").unwrap().radii().len(), 11);
        assert_eq!(parse_radii("14, 28,42").unwrap().radii(), [14.0, 28.0, 42.0]);
        for bad in ["0", "-3", "", "a", "1:2", "14:154:0", "28,14", "154:14:14", "1:2:3:4"] {
            assert!(matches!(parse_radii(bad), Err(CliError::BadRangeSyntax(..))), "{bad}");
        }
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
