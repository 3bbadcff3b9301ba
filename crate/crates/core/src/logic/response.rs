use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::LogicError;
use crate::fabric::DeviceKind;

/// Modulation amplitude of each device kind by (conducting, value), in arbitrary units.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceResponseTable {
    entries: BTreeMap<(DeviceKind, bool, bool), f64>,
}

impl Default for DeviceResponseTable {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let levels = [
            (DeviceKind::PassTransistor, 1.0, 0.25),
            (DeviceKind::ConfigCell, 0.6, 0.4),
            (DeviceKind::FfCore, 0.9, 0.5),
            (DeviceKind::Buffer, 0.7, 0.45),
        ];
        for (kind, on, off) in levels {
            for value in [false, true] {
                entries.insert((kind, true, value), on);
                entries.insert((kind, false, value), off);
            }
        }
        DeviceResponseTable { entries }
    }
}

impl DeviceResponseTable {
    pub fn amplitude(&self, kind: DeviceKind, conducting: bool, value: bool) -> f64 {
        self.entries[&(kind, conducting, value)]
    }

    pub fn set(&mut self, kind: DeviceKind, conducting: bool, value: bool, amplitude: f64) {
        self.entries.insert((kind, conducting, value), amplitude);
    }

    /// Amplitudes must be finite and non-negative, and a conducting device must respond
    /// more strongly than a non-conducting one of the same kind and value.
    pub fn check(&self) -> Result<(), LogicError> {
        for (&(kind, c, v), &a) in &self.entries {
            if !a.is_finite() || a < 0.0 {
                return Err(LogicError::ResponseTable(format!(
                    "{} {} {} has amplitude {a}",
                    kind.as_str(),
                    c as u8,
                    v as u8
                )));
            }
        }
        for kind in DeviceKind::ALL {
            for v in [false, true] {
                if self.amplitude(kind, true, v) <= self.amplitude(kind, false, v) {
                    return Err(LogicError::ResponseTable(format!(
                        "{}: conducting amplitude must exceed non-conducting (value {})",
                        kind.as_str(),
                        v as u8
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses `kind conducting value amplitude` rows on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, LogicError> {
        let mut table = DeviceResponseTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| LogicError::ResponseTable(format!("line {}: {m}", i + 1));
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [kind, c, v, a] = cols[..] else {
                return Err(err("expected `kind conducting value amplitude`"));
            };
            let kind = DeviceKind::from_name(kind).ok_or_else(|| err("unknown device kind"))?;
            let bit = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(err("expected 0 or 1")),
            };
            let amp: f64 = a.parse().map_err(|_| err("bad amplitude"))?;
            table.set(kind, bit(c)?, bit(v)?, amp);
        }
        table.check()?;
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# kind conducting value amplitude\n");
        for (&(kind, c, v), a) in &self.entries {
            let _ = writeln!(s, "{} {} {} {a}", kind.as_str(), c as u8, v as u8);
        }
        s
    }
}
