use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use growthbound::Result;
use serde::Serialize;

/// Output directory. Every CSV starts with one `#` line carrying the
/// timestamp and seed, the only line that differs between identical runs.
pub struct Output {
    dir: PathBuf,
    seed: u64,
    unix: u64,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    generated_unix: u64,
    config: &'a C,
    result: &'a R,
}

impl Output {
    pub fn create(dir: &Path, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Output {
            dir: dir.to_path_buf(),
            seed,
            unix,
        })
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        let dir = self.dir.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            seed: self.seed,
            unix: self.unix,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn header(&self) -> String {
        format!("# generated_unix={} seed={}", self.unix, self.seed)
    }

    /// `{command, version, seed, generated_unix, config, result}`.
    pub fn json<C: Serialize, R: Serialize>(&self, name: &str, command: &str, config: &C, result: &R) -> Result<()> {
        let env = Envelope {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            generated_unix: self.unix,
            config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.path(name), body)?;
        Ok(())
    }

    pub fn csv<I>(&self, name: &str, columns: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut f = std::fs::File::create(self.path(name))?;
        writeln!(f, "{}", self.header())?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}
