//! Output plumbing shared by all subcommands: atomic file writes, run
//! manifests, and the key=value defaults file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use kbstab_core::{Error, Result};
use sha2::{Digest, Sha256};

/// Write `bytes` to `path` atomically: temp file in the same directory, then
/// rename over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("not a writable file path: {}", path.display())))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Run manifest accompanying every report: the subcommand, its inputs with
/// content digests, seeds, and the digest of the defaults file. Contains no
/// timestamps so identical runs produce identical manifests.
pub struct Manifest {
    command: String,
    inputs: Vec<(PathBuf, String)>,
    seed: Option<u64>,
    config_digest: String,
    notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            inputs: Vec::new(),
            seed: None,
            config_digest: "-".into(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(self)
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&mut self, path: Option<&Path>) -> Result<&mut Self> {
        if let Some(path) = path {
            self.config_digest = sha256_file(path)?;
        }
        Ok(self)
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.notes.push(format!("{key}={value}"));
        self
    }

    /// Write the manifest next to `output` as `<output>.manifest`.
    pub fn write_for(&self, output: &Path) -> Result<()> {
        let mut text = String::new();
        text.push_str("#kbstab-manifest\n");
        text.push_str(&format!("command={}\n", self.command));
        for (path, digest) in &self.inputs {
            text.push_str(&format!("input={}\tsha256={}\n", path.display(), digest));
        }
        if let Some(seed) = self.seed {
            text.push_str(&format!("seed={seed}\n"));
        }
        text.push_str(&format!("config_digest={}\n", self.config_digest));
        for note in &self.notes {
            text.push_str(note);
            text.push('\n');
        }
        text.push_str(&format!("output={}\n", output.display()));
        let manifest_path = PathBuf::from(format!("{}.manifest", output.display()));
        atomic_write(&manifest_path, text.as_bytes())
    }
}

/// Plain key=value defaults, overridable by flags. Blank lines and lines
/// starting with `#` are ignored.
#[derive(Debug, Clone, Default)]
pub struct AppConfig {
    values: BTreeMap<String, String>,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path.display().to_string(), i + 1, "expected key=value")
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(AppConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Validation(format!("config key {key}: bad number {v:?}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Validation(format!("config key {key}: bad integer {v:?}")))
            })
            .transpose()
    }
}

/// Format a float for CSV output: shortest round-trip decimal.
pub fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{:.1}", x)
    } else {
        format!("{x}")
    }
}
