//! `key=value` run manifests. Flags are stored as `arg.<flag>=<value>` lines so a run can be
//! re-parsed by the same argument parser.

use std::fmt::Display;
use std::path::Path;

use anyhow::{bail, Context};

pub const ARG_PREFIX: &str = "arg.";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.push("tool", "llsi");
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn arg(&mut self, flag: &str, value: impl Display) {
        self.push(&format!("{ARG_PREFIX}{flag}"), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_arg(&mut self, flag: &str, value: &str) -> bool {
        let key = format!("{ARG_PREFIX}{flag}");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => {
                e.1 = value.to_string();
                true
            }
            None => false,
        }
    }

    /// `--flag value` pairs in recorded order.
    pub fn args(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(ARG_PREFIX)
                    .map(|f| [format!("--{f}"), v.clone()])
            })
            .flatten()
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("manifest line {}: expected key=value", n + 1);
            };
            m.entries.push((k.to_string(), v.to_string()));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        if self.to_text().lines().count() != self.entries.len() {
            bail!("manifest value contains a line break");
        }
        std::fs::write(path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Manifest::parse(&text)
    }
}

/// 64-bit FNV-1a, used to pin the contents of input files in manifests.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
