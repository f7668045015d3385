//! CSV artifacts.
//!
//! Numbers are written with 17 significant digits so that files round-trip and diff cleanly.
//! Unless the run is deterministic, each file starts with a `# generated at` comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Where artifacts go, and whether they carry a timestamp.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    deterministic: bool,
}

impl OutputDir {
    pub fn create(root: &Path, deterministic: bool) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            deterministic,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let file =
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        if !self.deterministic {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(out, "# generated at unix time {secs}")?;
        }
        Ok(out)
    }

    /// Writes a CSV file with `header` and pre-formatted `rows`.
    pub fn csv<I>(&self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut writer = csv::Writer::from_writer(self.open(name)?);
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Writes a plain text file.
    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        let mut out = self.open(name)?;
        out.write_all(body.as_bytes())?;
        out.flush()?;
        Ok(())
    }
}

pub fn header<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Vec<String> {
    names.into_iter().map(|s| s.as_ref().to_string()).collect()
}
