use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pdt_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// Identifies the inputs that produced an output file. No timestamps, so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, scenario: &Scenario, seed: u64) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.file.name.clone(),
            scenario_hash: scenario.hash().into(),
            seed,
        }
    }

    fn comment(&self) -> String {
        format!(
            "# pdt {} scenario={} scenario_hash={} seed={}",
            self.command, self.scenario, self.scenario_hash, self.seed
        )
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory whose files all carry the same provenance header.
pub struct OutDir {
    dir: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(dir: &Path, provenance: Provenance) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(p)?))
    }

    /// Comment line with the provenance, then a header row and the records.
    pub fn csv<R, I>(&self, name: &str, header: &[&str], rows: I) -> CliResult
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut f = self.open(name)?;
        writeln!(f, "{}", self.provenance.comment())?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON object with a leading `provenance` member.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> CliResult {
        let mut f = self.open(name)?;
        let doc = Document {
            provenance: &self.provenance,
            body,
        };
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    /// JSON lines; the first line is `{"provenance": ...}`.
    pub fn jsonl<T: Serialize>(&self, name: &str, lines: &[T]) -> CliResult {
        let mut f = self.open(name)?;
        serde_json::to_writer(&mut f, &serde_json::json!({ "provenance": self.provenance }))?;
        writeln!(f)?;
        for l in lines {
            serde_json::to_writer(&mut f, l)?;
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    /// Writes `text` as is, for formats that define their own header.
    pub fn text(&self, name: &str, text: &str) -> CliResult {
        let mut f = self.open(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
