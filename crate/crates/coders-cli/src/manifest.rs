//! JSON record of one command invocation.

use std::collections::BTreeMap;
use std::path::Path;

use coders::data::atomic_write;
use coders::Result;
use serde::Serialize;

use crate::config::Settings;

/// Bumped when the output layout changes incompatibly.
const ARTIFACT_VERSION: u32 = 1;

/// What one run did: resolved configuration, inputs, outputs, timings.
///
/// Rerunning the subcommand with the recorded configuration and inputs
/// rewrites every data file byte-for-byte; the manifest itself differs
/// only in its timings, which are informational.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    artifact_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    subcommand: &'static str,
    seed: Option<u64>,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per phase.
    timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, settings: &Settings, seed: Option<u64>) -> RunManifest {
        RunManifest {
            artifact_version: ARTIFACT_VERSION,
            tool: "coders",
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            config: settings.entries().clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        self.timings.insert(phase.to_string(), seconds);
    }

    /// Writes the manifest; call last so the timings are complete.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("map keys are strings");
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }
}
