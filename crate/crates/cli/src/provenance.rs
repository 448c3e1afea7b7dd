use bundlesim::dynamics::Tolerances;
use bundlesim::series::TimeSeries;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scenario::Scenario;

/// Everything needed to reproduce an output file. Deliberately free of
/// timestamps and host names so reruns are byte-identical.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub scenario: String,
    pub kind: &'static str,
    /// SHA-256 of the resolved scenario TOML (after overrides).
    pub scenario_sha256: String,
    pub version: &'static str,
    pub overrides: Vec<String>,
    pub seed: u64,
    pub tolerances: Vec<(String, Tolerances)>,
    pub n_fock: Option<usize>,
    pub active_dim: Option<usize>,
}

impl Provenance {
    pub fn new(s: &Scenario, overrides: &[String]) -> Self {
        Self {
            scenario: s.name.clone(),
            kind: s.run.kind.name(),
            scenario_sha256: sha256_hex(s.to_toml().as_bytes()),
            version: env!("CARGO_PKG_VERSION"),
            overrides: overrides.to_vec(),
            seed: s.run.seed,
            tolerances: Vec::new(),
            n_fock: s.truncation.as_ref().map(|t| t.n_fock).or(s.sweep.as_ref().map(|s| s.n_fock)),
            active_dim: None,
        }
    }

    pub fn stamp(&self, ts: &mut TimeSeries) {
        ts.set_meta("scenario", &self.scenario);
        ts.set_meta("scenario_sha256", &self.scenario_sha256);
        ts.set_meta("version", self.version);
        if !self.overrides.is_empty() {
            ts.set_meta("overrides", &self.overrides);
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
