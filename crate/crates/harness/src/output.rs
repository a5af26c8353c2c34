//! Run directories under `$FRACVORT_OUT` (default: the working directory).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::experiments::HarnessError;

pub const VERSION: &str = env!("FRACVORT_VERSION");

pub fn output_root() -> PathBuf {
    std::env::var_os("FRACVORT_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// A created output directory holding `config.toml` and `VERSION`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `root/name`, copying the configuration text verbatim.
    pub fn create(root: &Path, name: &str, config_text: Option<&str>) -> Result<Self, HarnessError> {
        let path = root.join(name);
        std::fs::create_dir_all(&path).map_err(io_err(&path))?;
        let dir = Self { path };
        if let Some(text) = config_text {
            dir.write("config.toml", text)?;
        }
        dir.write("VERSION", &format!("{VERSION}\n"))?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
        let p = self.file(name);
        std::fs::write(&p, contents).map_err(io_err(&p))?;
        Ok(p)
    }

    pub fn create_file(&self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, HarnessError> {
        let p = self.file(name);
        Ok(std::io::BufWriter::new(std::fs::File::create(&p).map_err(io_err(&p))?))
    }
}

/// Minimal CSV table. Cells are written as given, so callers keep them free
/// of commas.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

/// Float formatting used in every CSV: shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_renders_rows() {
        let mut c = Csv::new(["a", "b"]);
        c.push([num(0.1), num(2.0)]);
        assert_eq!(c.render(), "a,b\n0.1,2.0\n");
    }

    #[test]
    fn run_dir_records_config_and_version() {
        let tmp = tempfile::tempdir().unwrap();
        let d = RunDir::create(tmp.path(), "x", Some("[a]\n")).unwrap();
        assert_eq!(std::fs::read_to_string(d.file("config.toml")).unwrap(), "[a]\n");
        assert!(!std::fs::read_to_string(d.file("VERSION")).unwrap().trim().is_empty());
    }
}
