use crate::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const MANIFEST_SCHEMA: &str = "eigengeo.manifest.v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub schema: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub outputs: Vec<OutputFile>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| io_error(path, source))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad manifest {}: {e}", path.display())))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
    f.write_all(contents).map_err(|e| io_error(&tmp, e))?;
    f.sync_all().map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

/// Destination for a command's outputs: a directory with a manifest, or
/// stdout when no directory is given.
pub struct Sink {
    dir: Option<PathBuf>,
    outputs: Vec<OutputFile>,
    started: Instant,
    started_unix: u64,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> CliResult<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| io_error(d, e))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            outputs: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        })
    }

    pub fn emit(&mut self, name: &str, schema: &str, contents: &str) -> CliResult<()> {
        match &self.dir {
            Some(d) => {
                write_atomic(&d.join(name), contents.as_bytes())?;
                self.outputs.push(OutputFile {
                    path: name.to_string(),
                    schema: schema.to_string(),
                });
            }
            None => print!("{contents}"),
        }
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        args: &[String],
        config: serde_json::Value,
        seed: Option<u64>,
        summary: serde_json::Value,
    ) -> CliResult<()> {
        let Some(dir) = self.dir else {
            return Ok(());
        };
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            args: args.to_vec(),
            config,
            seed,
            version: eigengeo::VERSION.into(),
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            outputs: self.outputs,
            summary,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Input(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())
    }
}
