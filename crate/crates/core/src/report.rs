//! JSON and CSV emitters.

use serde::Serialize;
use serde_json::Value;

use crate::error::{GraspError, Result};
use crate::planner::{BenchmarkRow, PlanResult};

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Plan JSON with the `timings` block removed, for byte-level comparisons.
pub fn plan_json_without_timings(result: &PlanResult) -> Result<String> {
    let mut v = serde_json::to_value(result)?;
    if let Value::Object(map) = &mut v {
        map.remove("timings");
    }
    to_json(&v)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".to_string())
}

/// One row per object; probability columns are named `p_sigma_<value>`.
/// Missing values (no grasp found) are written as `-`.
pub fn benchmark_csv(rows: &[BenchmarkRow], sigmas: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["object", "analog", "points", "status", "closure", "sigma_min", "width", "plan_ms"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(sigmas.iter().map(|s| format!("p_sigma_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.object.clone(),
            r.analog.clone(),
            r.points.to_string(),
            r.status.as_str().to_string(),
            opt(r.closure),
            opt(r.sigma_min.map(|v| format!("{v:.6}"))),
            opt(r.width.map(|v| format!("{v:.6}"))),
            format!("{:.1}", r.plan_ms),
        ];
        rec.extend(r.probabilities.iter().map(|p| opt(p.map(|v| format!("{v:.3}")))));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| GraspError::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> GraspError {
    GraspError::invalid(format!("csv: {e}"))
}
