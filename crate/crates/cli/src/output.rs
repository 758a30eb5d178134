//! Output files. Everything written depends only on the config bytes and
//! the seed, so repeated invocations are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use sebs::report::CsvTable;

use crate::config::Config;
use crate::CliError;

pub struct Context {
    pub command: &'static str,
    pub config: Config,
    pub config_hash: String,
    pub seed: u64,
    out_dir: PathBuf,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    command: &'a str,
    version: String,
    config_hash: &'a str,
    seed: u64,
    outputs: &'a [String],
    warnings: &'a [String],
    summary: S,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Context {
    pub fn load(command: &'static str, path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        let mut config = Config::parse(&text)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        let out_dir = config.output_dir(out);
        Ok(Context {
            command,
            seed: config.seed,
            config,
            config_hash: sha256_hex(&bytes),
            out_dir,
            outputs: Vec::new(),
        })
    }

    /// First line of every output file.
    pub fn comment(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }

    pub fn table(&self, header: &[&str]) -> CsvTable {
        CsvTable::new(Some(&self.comment()), header)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::Io(self.out_dir.clone(), e))?;
        let file = format!("{}{name}", self.config.output.prefix);
        let path = self.out_dir.join(&file);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        log::info!("wrote {}", path.display());
        self.outputs.push(file);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: CsvTable) -> Result<(), CliError> {
        self.write(name, table.as_str())
    }

    pub fn write_manifest<S: Serialize>(&mut self, summary: S, warnings: &[String]) -> Result<(), CliError> {
        let mut outputs = self.outputs.clone();
        let name = format!("{}_manifest.json", self.command);
        outputs.push(format!("{}{name}", self.config.output.prefix));
        let manifest = Manifest {
            command: self.command,
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            config_hash: &self.config_hash,
            seed: self.seed,
            outputs: &outputs,
            warnings,
            summary,
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        self.write(&name, &json)
    }
}
