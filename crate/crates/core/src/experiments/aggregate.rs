use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimators::mean_stderr;

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub keys: Vec<String>,
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub log10_n: Option<f64>,
    pub log10_mean: Option<f64>,
}

/// Groups result rows by `group_keys`, averaging the `value` column.
///
/// Groups appear in order of first occurrence. `log10_n` is filled when `n`
/// is a group key, `log10_mean` when the mean is positive.
pub fn emit_plot_data<R: Read, W: Write>(input: R, group_keys: &[String], out: W) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("no column named {name:?}")))
    };
    let value_col = col("value")?;
    let key_cols = group_keys.iter().map(|k| col(k)).collect::<Result<Vec<_>>>()?;
    let n_pos = group_keys.iter().position(|k| k == "n");

    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<f64>> = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let key: Vec<String> = key_cols.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect();
        let raw = rec.get(value_col).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("non-numeric value {raw:?}")))?;
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(value);
    }
    if order.is_empty() {
        return Err(Error::EmptyInput("result rows"));
    }

    let rows: Vec<AggregateRow> = order
        .into_iter()
        .map(|keys| {
            let values = &groups[&keys];
            let (mean, stderr) = mean_stderr(values);
            let log10_n = n_pos.and_then(|i| keys[i].parse::<f64>().ok()).filter(|n| *n > 0.0).map(f64::log10);
            let log10_mean = (mean > 0.0).then(|| mean.log10());
            AggregateRow { keys, count: values.len(), mean, stderr, log10_n, log10_mean }
        })
        .collect();

    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = group_keys.to_vec();
    header.extend(["count", "mean", "stderr"].map(String::from));
    if n_pos.is_some() {
        header.push("log10_n".into());
    }
    header.push("log10_mean".into());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        let mut rec = r.keys.clone();
        rec.extend([r.count.to_string(), r.mean.to_string(), r.stderr.to_string()]);
        if n_pos.is_some() {
            rec.push(opt(r.log10_n));
        }
        rec.push(opt(r.log10_mean));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}
