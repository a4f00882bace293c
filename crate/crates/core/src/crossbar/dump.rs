//! Plain-text crossbar state snapshots.
//!
//! ```text
//! mtj-crossbar 1
//! arch 1R
//! rows 3
//! cols 2
//! params {"ic0":{...},...}
//! # col row state r_p_actual r_ap_actual
//! 0 0 P 4860 9700
//! ...
//! ```
//!
//! Resistances use Rust's shortest round-trip float formatting, so a
//! restore reproduces the dump bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Architecture, Crossbar};
use crate::device::{DeviceParams, MtjState, MtjSynapse};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &str = "mtj-crossbar";
pub const DUMP_VERSION: u32 = 1;

impl Crossbar {
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{DUMP_MAGIC} {DUMP_VERSION}");
        let _ = writeln!(out, "arch {}", self.arch);
        let _ = writeln!(out, "rows {}", self.rows);
        let _ = writeln!(out, "cols {}", self.cols);
        let _ = writeln!(
            out,
            "params {}",
            serde_json::to_string(&self.params).expect("params serialize")
        );
        out.push_str("# col row state r_p_actual r_ap_actual\n");
        for j in 0..self.cols {
            for i in 0..self.rows {
                let c = self.cell(j, i);
                let _ = writeln!(out, "{j} {i} {} {} {}", c.state, c.r_p_actual, c.r_ap_actual);
            }
        }
        out
    }

    pub fn restore(text: &str) -> Result<Crossbar> {
        let err = |line: usize, reason: String| Error::Dump { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing `{key}` header")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| err(n, format!("expected `{key}`")))?;
            Ok((n, rest.trim().to_string()))
        };

        let (n, version) = header(DUMP_MAGIC)?;
        if version != DUMP_VERSION.to_string() {
            return Err(err(n, format!("unsupported version {version}")));
        }
        let (n, arch) = header("arch")?;
        let arch: Architecture = arch.parse().map_err(|e: Error| err(n, e.to_string()))?;
        let (n, rows) = header("rows")?;
        let rows: usize = rows.parse().map_err(|_| err(n, "bad row count".into()))?;
        let (n, cols) = header("cols")?;
        let cols: usize = cols.parse().map_err(|_| err(n, "bad column count".into()))?;
        let (n, params) = header("params")?;
        let params: DeviceParams = serde_json::from_str(&params).map_err(|e| err(n, e.to_string()))?;

        let mut cells = vec![None; rows * cols];
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(n, format!("expected 5 fields, found {}", f.len())));
            }
            let j: usize = f[0].parse().map_err(|_| err(n, "bad column index".into()))?;
            let i: usize = f[1].parse().map_err(|_| err(n, "bad row index".into()))?;
            if j >= cols || i >= rows {
                return Err(err(n, format!("cell ({j}, {i}) out of range")));
            }
            let state = match f[2] {
                "P" => MtjState::P,
                "AP" => MtjState::AP,
                other => return Err(err(n, format!("unknown state `{other}`"))),
            };
            let r_p_actual: f64 = f[3].parse().map_err(|_| err(n, "bad r_p".into()))?;
            let r_ap_actual: f64 = f[4].parse().map_err(|_| err(n, "bad r_ap".into()))?;
            if !(r_p_actual > 0.0 && r_ap_actual > r_p_actual) {
                return Err(err(n, "resistances must satisfy r_ap > r_p > 0".into()));
            }
            let slot = &mut cells[j * rows + i];
            if slot.is_some() {
                return Err(err(n, format!("cell ({j}, {i}) listed twice")));
            }
            *slot = Some(MtjSynapse {
                state,
                r_p_actual,
                r_ap_actual,
            });
        }
        let missing = cells.iter().filter(|c| c.is_none()).count();
        if missing > 0 {
            return Err(err(0, format!("{missing} cells missing from dump")));
        }
        Crossbar::from_parts(rows, cols, arch, params, cells.into_iter().flatten().collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Crossbar> {
        Crossbar::restore(&std::fs::read_to_string(path)?)
    }
}
