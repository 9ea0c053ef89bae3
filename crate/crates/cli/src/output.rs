//! File formats. Every float is written with 17 significant digits so a
//! value read back is bit-identical to the one written.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use threewave::kinetics::UNDERFLOW_FLOOR;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EQUILIBRIUM_FILE: &str = "equilibrium.csv";
pub const KAPPA_FILE: &str = "kappa.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.txt";

pub const TRAJECTORY_HEADER: &str = "tau,mode,occupation";
pub const EQUILIBRIUM_HEADER: &str = "mode,n_B,inv_n_plus_1";
pub const KAPPA_HEADER: &str = "mode,kappa";
pub const SUMMARY_HEADER: &str = "k_ini,beta_exact,beta_approx,beta_fitted,rel_err_fit";

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else {
        format!("{v:.16e}")
    }
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Streams `tau,mode,occupation` rows; occupations below the underflow
/// floor are written as zero.
pub struct TrajectoryWriter {
    out: BufWriter<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        Ok(Self { out })
    }

    pub fn record(&mut self, tau: f64, y: &[f64]) -> io::Result<()> {
        let t = num(tau);
        for (i, &v) in y.iter().enumerate() {
            let v = if v < UNDERFLOW_FLOOR { 0.0 } else { v };
            writeln!(self.out, "{t},{},{}", i + 1, num(v))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Writes a header and one row per mode: `mode,<columns...>`.
pub fn write_mode_table(path: &Path, header: &str, columns: &[&[f64]]) -> anyhow::Result<()> {
    let write = || -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        let rows = columns.first().map_or(0, |c| c.len());
        for i in 0..rows {
            write!(out, "{}", i + 1)?;
            for c in columns {
                write!(out, ",{}", num(c[i]))?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k_ini: Option<usize>,
    pub beta_exact: f64,
    pub beta_approx: f64,
    pub beta_fitted: f64,
    pub rel_err_fit: f64,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let k = r.k_ini.map_or_else(String::new, |k| k.to_string());
        s.push_str(&format!(
            "{k},{},{},{},{}\n",
            num(r.beta_exact),
            num(r.beta_approx),
            num(r.beta_fitted),
            num(r.rel_err_fit)
        ));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A long-format trajectory read back into one row of occupations per tau.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub taus: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn n_modes(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Index of the record closest to `tau`.
    pub fn index_of(&self, tau: f64) -> Option<usize> {
        (0..self.taus.len()).min_by(|&a, &b| {
            (self.taus[a] - tau)
                .abs()
                .total_cmp(&(self.taus[b] - tau).abs())
        })
    }
}

pub fn read_trajectory(path: &Path) -> anyhow::Result<TrajectoryTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(TRAJECTORY_HEADER) {
        bail!("{}: missing header `{TRAJECTORY_HEADER}`", path.display());
    }
    let mut table = TrajectoryTable {
        taus: Vec::new(),
        states: Vec::new(),
    };
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let ctx = || format!("{} line {}", path.display(), lineno + 2);
        let mut f = line.split(',');
        let (Some(t), Some(m), Some(v), None) = (f.next(), f.next(), f.next(), f.next()) else {
            bail!("{}: expected 3 fields", ctx());
        };
        let tau: f64 = t.parse().with_context(ctx)?;
        let mode: usize = m.parse().with_context(ctx)?;
        let value: f64 = v.parse().with_context(ctx)?;
        if mode == 1 {
            table.taus.push(tau);
            table.states.push(Vec::new());
        }
        let row = table
            .states
            .last_mut()
            .filter(|r| r.len() + 1 == mode && table.taus.last() == Some(&tau))
            .with_context(|| format!("{}: rows out of order", ctx()))?;
        row.push(value);
    }
    if let Some(n) = table.states.first().map(Vec::len) {
        if table.states.iter().any(|r| r.len() != n) {
            bail!("{}: ragged trajectory", path.display());
        }
    }
    Ok(table)
}
