//! Deterministic report emission: CSV trace rendering with fixed-width
//! scientific floats (17 significant digits, '.' decimal) so identical runs
//! produce byte-identical files.

use crate::trace::ConvergenceTrace;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV row of a partition-indexed trace.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub n: usize,
    pub mesh: f64,
    pub t: f64,
    pub value: Vec<f64>,
    pub delta_norm: f64,
}

/// Render rows as `n,mesh,t,value_0..value_{d-1},delta_norm` with a header.
pub fn render_csv(dim: usize, rows: &[TraceRow]) -> String {
    let mut out = String::from("n,mesh,t");
    for i in 0..dim {
        out.push_str(&format!(",value_{i}"));
    }
    out.push_str(",delta_norm\n");
    for row in rows {
        out.push_str(&row.n.to_string());
        out.push(',');
        out.push_str(&format_float(row.mesh));
        out.push(',');
        out.push_str(&format_float(row.t));
        for v in &row.value {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        // NaN delta on the first level renders as an empty cell
        out.push(',');
        if row.delta_norm.is_finite() {
            out.push_str(&format_float(row.delta_norm));
        }
        out.push('\n');
    }
    out
}

/// Flatten a per-time trace into CSV rows.
pub fn trace_rows(t: f64, trace: &ConvergenceTrace) -> Vec<TraceRow> {
    trace
        .entries
        .iter()
        .map(|e| TraceRow {
            n: e.n,
            mesh: e.mesh,
            t,
            value: e.value.clone(),
            delta_norm: e.delta_norm,
        })
        .collect()
}
