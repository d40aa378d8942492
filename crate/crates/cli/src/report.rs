use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Result;
use bethe_core::{SolveTrace, TraceRecord};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn columns(prefix: &str, track: &[usize]) -> Vec<String> {
    let mut cols: Vec<String> = ["grad_inf", "grad_l2", "bp_residual"]
        .iter()
        .map(|c| format!("{prefix}{c}"))
        .collect();
    cols.extend(track.iter().map(|v| format!("{prefix}marginal_{v}")));
    cols
}

fn fields(r: &TraceRecord) -> Vec<String> {
    let mut f = vec![num(r.grad_inf), num(r.grad_l2), num(r.bp_residual)];
    f.extend(r.marginals.iter().map(|&m| num(m)));
    f
}

pub fn write_trace(out: impl Write, trace: &SolveTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend(columns("", trace.tracked_nodes()));
    w.write_record(&header)?;
    for r in trace.records() {
        let mut row = vec![r.t.to_string()];
        row.extend(fields(r));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per iteration present in either trace; a trace without that
/// iteration leaves its columns empty.
pub fn write_merged(out: impl Write, a: (&str, &SolveTrace), b: (&str, &SolveTrace)) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend(columns(&format!("{}_", a.0), a.1.tracked_nodes()));
    header.extend(columns(&format!("{}_", b.0), b.1.tracked_nodes()));
    w.write_record(&header)?;

    let width = |t: &SolveTrace| 3 + t.tracked_nodes().len();
    let mut rows: BTreeMap<usize, (Option<&TraceRecord>, Option<&TraceRecord>)> = BTreeMap::new();
    for r in a.1.records() {
        rows.entry(r.t).or_default().0 = Some(r);
    }
    for r in b.1.records() {
        rows.entry(r.t).or_default().1 = Some(r);
    }
    for (t, (ra, rb)) in rows {
        let mut row = vec![t.to_string()];
        row.extend(ra.map(fields).unwrap_or_else(|| vec![String::new(); width(a.1)]));
        row.extend(rb.map(fields).unwrap_or_else(|| vec![String::new(); width(b.1)]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
