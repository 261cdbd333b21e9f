//! CSV emission. Every file starts with `#` metadata lines (artifact version,
//! config digest, master seed) followed by the header row; identical inputs
//! reproduce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct CsvFile {
    writer: BufWriter<File>,
    pub path: PathBuf,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, digest: &str, seed: u64, header: &str) -> Result<Self> {
        Self::create_with_comments(dir, name, digest, seed, &[], header)
    }

    pub fn create_with_comments(
        dir: &Path,
        name: &str,
        digest: &str,
        seed: u64,
        comments: &[String],
        header: &str,
    ) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let path = dir.join(name);
        let file = File::create(&path)
            .with_context(|| format!("creating output file {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "# artifact=delaymab v{}", env!("CARGO_PKG_VERSION"))?;
        writeln!(writer, "# config_digest={digest}")?;
        writeln!(writer, "# master_seed={seed}")?;
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        writeln!(writer, "{header}")?;
        Ok(Self { writer, path })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.writer, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Full-precision, locale-free float formatting (shortest round-trip form).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}
