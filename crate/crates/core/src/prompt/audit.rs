use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::PromptError;

/// One prompt/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub id: String,
    pub unix_ms: u128,
    pub task_name: String,
    pub prompt: String,
    pub prompt_tokens: usize,
    pub completion: Option<String>,
    pub error: Option<String>,
    pub retries: u32,
    pub tags: Vec<String>,
    pub mismatch: bool,
}

/// Append-only newline-delimited JSON log.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| PromptError::Audit(e.to_string()))?;
        Ok(Self { path, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &AuditEntry) -> Result<(), PromptError> {
        let mut line = serde_json::to_vec(entry).map_err(|e| PromptError::Audit(e.to_string()))?;
        line.push(b'\n');
        let mut f = self.file.lock().expect("audit log poisoned");
        f.write_all(&line).map_err(|e| PromptError::Audit(e.to_string()))
    }

    pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<AuditEntry>, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Audit(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| PromptError::Audit(e.to_string())))
            .collect()
    }
}
