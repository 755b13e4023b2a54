use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

impl Input {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        Input { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

/// Attached to every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<Input>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
}

impl Provenance {
    pub fn new(command: &'static str, inputs: Vec<Input>) -> Self {
        Provenance {
            tool: "legal-ner",
            tool_version: legal_ner::VERSION,
            command,
            inputs,
            seed: None,
            policy: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn policy(mut self, policy: impl ToString) -> Self {
        self.policy = Some(policy.to_string());
        self
    }

    /// One-line summary for text outputs.
    pub fn header(&self) -> String {
        let mut line = format!("# {} {} {}", self.tool, self.tool_version, self.command);
        if let Some(seed) = self.seed {
            line.push_str(&format!(" seed={seed}"));
        }
        if let Some(policy) = &self.policy {
            line.push_str(&format!(" policy={policy}"));
        }
        for input in &self.inputs {
            line.push_str(&format!("\n# {} sha256:{}", input.path, input.sha256));
        }
        line
    }
}

/// `value` as a JSON object with a `provenance` member added.
pub fn with_provenance<T: Serialize>(value: &T, provenance: &Provenance) -> serde_json::Value {
    let mut json = serde_json::to_value(value).expect("outputs serialize");
    if let serde_json::Value::Object(map) = &mut json {
        map.insert("provenance".to_owned(), serde_json::to_value(provenance).expect("provenance serializes"));
    }
    json
}
