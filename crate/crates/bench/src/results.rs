//! Result rows and their aggregation.
//!
//! Schema: `experiment,method,n,alpha,shift,rep,metric,value,stderr,seed,config_hash`.
//! Per-replication rows carry the replication index and an empty `stderr`.
//! Aggregate rows carry `rep = all`: one `mean_<metric>` row with the
//! standard error and one `count_<metric>` row with the replication count.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub n: usize,
    pub alpha: String,
    pub shift: f64,
    pub rep: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error (sample standard deviation over `√count`).
pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            mean: f64::NAN,
            stderr: f64::NAN,
            count,
        };
    }
    let k = count as f64;
    let mean = values.iter().sum::<f64>() / k;
    let stderr = if count > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    Summary { mean, stderr, count }
}

type GroupKey = (String, String, usize, String, u64, String);

fn key(r: &ResultRow) -> GroupKey {
    (
        r.experiment.clone(),
        r.method.clone(),
        r.n,
        r.alpha.clone(),
        r.shift.to_bits(),
        r.metric.clone(),
    )
}

/// Aggregates per-replication rows, grouping by every column except `rep`,
/// `value`, `stderr` and `seed`. Groups appear in first-seen order.
pub fn aggregate(rows: &[ResultRow], base_seed: u64) -> Vec<ResultRow> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: std::collections::HashMap<GroupKey, (usize, Vec<f64>)> = std::collections::HashMap::new();
    for r in rows.iter().filter(|r| r.rep != "all") {
        let k = key(r);
        let entry = groups.entry(k.clone()).or_insert_with(|| {
            order.push(k);
            (0, Vec::new())
        });
        entry.0 += 1;
        entry.1.push(r.value);
    }
    let mut out = Vec::with_capacity(2 * order.len());
    for k in order {
        let first = rows.iter().find(|r| key(r) == k).expect("group has a row");
        let s = summarize(&groups[&k].1);
        let base = ResultRow {
            rep: "all".into(),
            seed: base_seed,
            ..first.clone()
        };
        out.push(ResultRow {
            metric: format!("mean_{}", first.metric),
            value: s.mean,
            stderr: Some(s.stderr),
            ..base.clone()
        });
        out.push(ResultRow {
            metric: format!("count_{}", first.metric),
            value: s.count as f64,
            stderr: None,
            ..base
        });
    }
    out
}

pub fn write_rows<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "experiment", "method", "n", "alpha", "shift", "rep", "metric", "value", "stderr", "seed", "config_hash",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Finds the aggregate `(mean, stderr)` for a method and metric.
pub fn lookup(rows: &[ResultRow], method: &str, n: usize, alpha: &str, shift: f64, metric: &str) -> Option<Summary> {
    let find = |prefix: &str| {
        rows.iter().find(|r| {
            r.rep == "all"
                && r.method == method
                && r.n == n
                && r.alpha == alpha
                && r.shift == shift
                && r.metric == format!("{prefix}_{metric}")
        })
    };
    let mean = find("mean")?;
    let count = find("count")?;
    Some(Summary {
        mean: mean.value,
        stderr: mean.stderr.unwrap_or(f64::NAN),
        count: count.value as usize,
    })
}
