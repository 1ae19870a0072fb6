//! Rectangular numeric result tables with embedded run metadata.
//!
//! Simulated statistics are stored as exact integer sums in column triples
//! `X_n, X_sum, X_sumsq` followed by the derived `X_mean, X_stderr`. Shards
//! of one run therefore merge exactly, in any order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentSpec;
use crate::{Error, Result};

const META_PREFIX: &str = "# meta: ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// SHA-256 of the canonical text form of the system config.
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub spec: Option<ExperimentSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub schema: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Metadata,
}

impl ResultTable {
    pub fn new(schema: &[&str], metadata: Metadata) -> Self {
        Self { schema: schema.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), metadata }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.schema.len(), "row width must match schema");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c == name)
    }

    /// Values of one column, panicking if it does not exist.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let i = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let meta = serde_json::to_string(&self.metadata).map_err(std::io::Error::other)?;
        writeln!(out, "{META_PREFIX}{meta}")?;
        writeln!(out, "{}", self.schema.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta_line = lines.next().ok_or_else(|| Error::Schema("empty table".into()))?;
        let meta = meta_line
            .strip_prefix(META_PREFIX)
            .ok_or_else(|| Error::Schema("missing metadata line".into()))?;
        let metadata: Metadata = serde_json::from_str(meta)?;
        let header = lines.next().ok_or_else(|| Error::Schema("missing header".into()))?;
        let schema: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Schema(format!("row {k}: {e}")))?;
            if row.len() != schema.len() {
                return Err(Error::Schema(format!("row {k} has {} cells, expected {}", row.len(), schema.len())));
            }
            rows.push(row);
        }
        Ok(Self { schema, rows, metadata })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse_csv(&text)
    }

    /// Recompute every `X_mean` and `X_stderr` from its sums.
    pub fn finalize(&mut self) {
        for (_, [n, s, ss, mean, se]) in stat_groups(&self.schema) {
            for row in &mut self.rows {
                let (m, e) = mean_stderr(row[n], row[s], row[ss]);
                row[mean] = m;
                row[se] = e;
            }
        }
    }
}

/// Sample mean and standard error from a count, a sum and a sum of squares.
pub fn mean_stderr(n: f64, sum: f64, sumsq: f64) -> (f64, f64) {
    if n < 1.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Column indices of every complete `X_n, X_sum, X_sumsq, X_mean, X_stderr` group.
fn stat_groups(schema: &[String]) -> Vec<(String, [usize; 5])> {
    let find = |name: String| schema.iter().position(|c| *c == name);
    schema
        .iter()
        .filter_map(|c| c.strip_suffix("_n"))
        .filter_map(|base| {
            let idx = [
                find(format!("{base}_n"))?,
                find(format!("{base}_sum"))?,
                find(format!("{base}_sumsq"))?,
                find(format!("{base}_mean"))?,
                find(format!("{base}_stderr"))?,
            ];
            Some((base.to_string(), idx))
        })
        .collect()
}

/// Merge trial shards of one experiment into the table a single run over
/// the union of their trials would have produced.
pub fn summarize(tables: &[ResultTable]) -> Result<ResultTable> {
    let first = tables.first().ok_or_else(|| Error::Schema("nothing to summarize".into()))?;
    let groups = stat_groups(&first.schema);
    let mut summed = vec![false; first.schema.len()];
    for (_, idx) in &groups {
        for &i in idx {
            summed[i] = true;
        }
    }

    let mut shards: Vec<(u64, u64)> = Vec::new();
    let shard_key = |t: &ResultTable| t.metadata.spec.as_ref().map(|s| (s.trial_offset, s.trials));
    for t in tables {
        if t.schema != first.schema {
            return Err(Error::Schema("column sets differ".into()));
        }
        if t.rows.len() != first.rows.len() {
            return Err(Error::Schema("row counts differ".into()));
        }
        if t.metadata.config_hash != first.metadata.config_hash
            || t.metadata.master_seed != first.metadata.master_seed
            || t.metadata.version != first.metadata.version
        {
            return Err(Error::Schema("tables come from different configs, seeds or versions".into()));
        }
        match (&t.metadata.spec, &first.metadata.spec) {
            (Some(a), Some(b)) if a.without_shard() == b.without_shard() => {}
            (None, None) => {}
            _ => return Err(Error::Schema("experiment definitions differ".into())),
        }
        for (r, (a, b)) in t.rows.iter().zip(&first.rows).enumerate() {
            for (c, (x, y)) in a.iter().zip(b).enumerate() {
                if !summed[c] && x.to_bits() != y.to_bits() && !(x.is_nan() && y.is_nan()) {
                    return Err(Error::Schema(format!("row {r} column {} differs", first.schema[c])));
                }
            }
        }
        if let Some(k) = shard_key(t) {
            shards.push(k);
        }
    }

    shards.sort_unstable();
    for w in shards.windows(2) {
        if w[0].0 + w[0].1 != w[1].0 {
            return Err(Error::Schema(format!(
                "trial ranges must tile without gaps or overlap: [{}, {}) then [{}, ..)",
                w[0].0,
                w[0].0 + w[0].1,
                w[1].0
            )));
        }
    }

    let mut out = first.clone();
    for row in &mut out.rows {
        for (_, [n, s, ss, _, _]) in &groups {
            row[*n] = 0.0;
            row[*s] = 0.0;
            row[*ss] = 0.0;
        }
    }
    for t in tables {
        for (row, src) in out.rows.iter_mut().zip(&t.rows) {
            for (_, [n, s, ss, _, _]) in &groups {
                row[*n] += src[*n];
                row[*s] += src[*s];
                row[*ss] += src[*ss];
            }
        }
    }
    out.finalize();
    if let (Some(spec), Some(&(start, _))) = (out.metadata.spec.as_mut(), shards.first()) {
        spec.trial_offset = start;
        spec.trials = shards.iter().map(|s| s.1).sum();
    }
    Ok(out)
}
