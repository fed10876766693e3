//! Reading and writing logged datasets as CSV.
//!
//! Header: `x_0..x_{d-1},price_index,sold[,valuation_index][,pi_1..pi_m]`.
//! `price_index` is the 1-based rung, `sold` is `0/1` or `true/false`. When
//! the `pi_*` columns are absent the caller must supply one propensity
//! vector for every row. Schema errors report the 1-based data row (the
//! header is row 0) and the column name.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ladder::{Dataset, ObservedRecord, PriceLadder, Propensities};

struct Layout {
    features: Vec<usize>,
    price: usize,
    sold: usize,
    valuation: Option<usize>,
    propensities: Vec<usize>,
}

fn schema(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn numbered_columns(headers: &csv::StringRecord, prefix: &str, first: usize) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = Vec::new();
    for (pos, h) in headers.iter().enumerate() {
        if let Some(rest) = h.trim().strip_prefix(prefix) {
            let k: usize = rest
                .parse()
                .map_err(|_| schema(0, h, format!("expected {prefix}<number>")))?;
            found.push((k, pos));
        }
    }
    found.sort_unstable();
    for (expect, (k, _)) in (first..).zip(&found) {
        if *k != expect {
            return Err(schema(0, &format!("{prefix}{expect}"), "column missing or out of sequence"));
        }
    }
    Ok(found.into_iter().map(|(_, pos)| pos).collect())
}

fn layout(headers: &csv::StringRecord, m: usize) -> Result<Layout> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let price = find("price_index").ok_or_else(|| schema(0, "price_index", "required column missing"))?;
    let sold = find("sold").ok_or_else(|| schema(0, "sold", "required column missing"))?;
    let features = numbered_columns(headers, "x_", 0)?;
    let propensities = numbered_columns(headers, "pi_", 1)?;
    if !propensities.is_empty() && propensities.len() != m {
        return Err(schema(
            0,
            "pi_*",
            format!("{} propensity columns for a ladder of {m} prices", propensities.len()),
        ));
    }
    Ok(Layout {
        features,
        price,
        sold,
        valuation: find("valuation_index"),
        propensities,
    })
}

fn parse_f64(s: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| schema(row, column, format!("{s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(schema(row, column, format!("{s:?} is not finite")));
    }
    Ok(v)
}

fn parse_usize(s: &str, row: usize, column: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| schema(row, column, format!("{s:?} is not a nonnegative integer")))
}

fn parse_bool(s: &str, row: usize) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(schema(row, "sold", format!("{other:?} is not 0/1 or true/false"))),
    }
}

/// Reads a dataset. `fallback` supplies propensities when the file has no
/// `pi_*` columns.
pub fn read_dataset<R: Read>(
    reader: R,
    ladder: &PriceLadder,
    fallback: Option<&Propensities>,
) -> Result<Dataset> {
    let m = ladder.len();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let lay = layout(&headers, m)?;
    if lay.propensities.is_empty() {
        match fallback {
            None => return Err(schema(0, "pi_*", "no propensity columns and no fallback propensities")),
            Some(p) if p.len() != m => return Err(Error::dims("fallback propensities", m, p.len())),
            Some(_) => {}
        }
    }
    let mut records = Vec::new();
    let mut props = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let col = |pos: usize| rec.get(pos).unwrap_or("");
        let features = lay
            .features
            .iter()
            .map(|&p| parse_f64(col(p), row, &headers[p]))
            .collect::<Result<Vec<f64>>>()?;
        let price_index = parse_usize(col(lay.price), row, "price_index")?;
        if price_index == 0 || price_index > m {
            return Err(schema(row, "price_index", format!("{price_index} outside 1..={m}")));
        }
        let sold = parse_bool(col(lay.sold), row)?;
        let latent_valuation = match lay.valuation {
            Some(p) if !col(p).trim().is_empty() => {
                let v = parse_usize(col(p), row, "valuation_index")?;
                if v > m {
                    return Err(schema(row, "valuation_index", format!("{v} outside 0..={m}")));
                }
                Some(v)
            }
            _ => None,
        };
        let pi0 = if lay.propensities.is_empty() {
            fallback.cloned().expect("checked above")
        } else {
            let raw = lay
                .propensities
                .iter()
                .map(|&p| parse_f64(col(p), row, &headers[p]))
                .collect::<Result<Vec<f64>>>()?;
            Propensities::new(raw).map_err(|e| schema(row, "pi_*", e.to_string()))?
        };
        records.push(ObservedRecord {
            features,
            price_index,
            sold,
            latent_valuation,
        });
        props.push(pi0);
    }
    Dataset::new(ladder.clone(), records, props)
}

/// Writes `data` with per-row propensities; `valuation_index` is included
/// when every record carries one.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let d = data.feature_dim();
    let m = data.m();
    let with_valuation = !data.is_empty() && data.records.iter().all(|r| r.latent_valuation.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..d).map(|k| format!("x_{k}")).collect();
    header.push("price_index".into());
    header.push("sold".into());
    if with_valuation {
        header.push("valuation_index".into());
    }
    header.extend((1..=m).map(|j| format!("pi_{j}")));
    w.write_record(&header)?;
    for (rec, pi0) in data.records.iter().zip(&data.propensities) {
        let mut row: Vec<String> = rec.features.iter().map(|x| x.to_string()).collect();
        row.push(rec.price_index.to_string());
        row.push(if rec.sold { "1" } else { "0" }.into());
        if with_valuation {
            row.push(rec.latent_valuation.expect("checked above").to_string());
        }
        row.extend(pi0.as_slice().iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
