use std::path::{Path, PathBuf};

use qwalk_core::stats::gaussian_cdf_1d;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::ReportArgs;
use crate::error::{usage, CliResult};
use crate::output::write_json;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    /// `|value − reference|` or the distance itself, compared against `tolerance`.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn abs(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let error = (value - reference).abs();
        Self::new(name, value, reference, error, tolerance)
    }

    fn rel(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let error = (value - reference).abs() / reference.abs();
        Self::new(name, value, reference, error, tolerance)
    }

    fn distance(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, 0.0, value, tolerance)
    }

    fn new(name: &str, value: f64, reference: f64, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            error,
            tolerance,
            pass: error.is_finite() && error <= tolerance,
        }
    }
}

fn num(v: &Value, key: &str) -> CliResult<f64> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| crate::error::CliError::Usage(format!("missing numeric field {key:?}")))
}

fn vec_f64(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

fn sibling(summary: &Path, v: &Value, key: &str) -> Option<PathBuf> {
    let name = v.get("files")?.get(key)?.as_str()?;
    Some(summary.parent().unwrap_or(Path::new(".")).join(name))
}

fn read_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match row {
            Ok(row) => rows.push(row),
            Err(_) => return usage(format!("{} holds a non-numeric value", path.display())),
        }
    }
    Ok(rows)
}

/// Exact KS distance of a step ECDF given as `(z, F(z))` rows.
pub fn ks_from_steps(rows: &[Vec<f64>], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for row in rows {
        let g = cdf(row[0]);
        worst = worst.max((row[1] - g).abs()).max((prev - g).abs());
        prev = row[1];
    }
    worst
}

fn same(summary: &Value, analytic: &Value, key: &str) -> CliResult<()> {
    if summary.get(key) != analytic.get(key) {
        return usage(format!(
            "summary and analytic files disagree on {key}: {} vs {}",
            summary.get(key).unwrap_or(&Value::Null),
            analytic.get(key).unwrap_or(&Value::Null)
        ));
    }
    Ok(())
}

fn frac_f64(v: &Value) -> Option<f64> {
    let s = v.as_str()?;
    let r = crate::parse::rational(s).ok()?;
    Some(crate::output::dec(&r))
}

pub fn checks(args: &ReportArgs, summary: &Value, analytic: &Value) -> CliResult<Vec<Check>> {
    for key in ["model", "A0", "A1", "p0"] {
        same(summary, analytic, key)?;
    }
    let mut out = Vec::new();
    let mean = summary.get("mean").and_then(vec_f64).unwrap_or_default();
    let mass = summary.get("label_mass").and_then(vec_f64).unwrap_or_default();
    let p = analytic.get("p").and_then(frac_f64).unwrap_or(f64::NAN);
    match summary["model"].as_str() {
        Some("1d") => {
            if let Some(m0) = mass.first() {
                out.push(Check::abs("label_mass_0", *m0, p, args.mass_tol));
            }
            let d = analytic.get("D").and_then(frac_f64).unwrap_or(f64::NAN);
            let sigma2 = analytic.get("sigma2").and_then(frac_f64).unwrap_or(f64::NAN);
            out.push(Check::rel("drift", mean.first().copied().unwrap_or(f64::NAN), d, args.drift_tol));
            let var = summary["cov"][0][0].as_f64().unwrap_or(f64::NAN);
            out.push(Check::rel("variance", var, sigma2, args.var_tol));
            if let Some(path) = sibling(&args.summary, summary, "ecdf") {
                let rows = read_rows(&path)?;
                if !rows.is_empty() && sigma2 > 0.0 {
                    let ks = ks_from_steps(&rows, |z| gaussian_cdf_1d(z, sigma2));
                    out.push(Check::distance("ks", ks, args.ks_tol));
                }
            }
            if let (Some(path), Ok(width)) = (sibling(&args.summary, summary, "labels"), num(summary, "label_bin_width")) {
                let ratio = p / (1.0 - p);
                let l1: f64 = read_rows(&path)?.iter().map(|r| (r[1] - ratio * r[2]).abs() * width).sum();
                out.push(Check::distance("label_l1", l1, args.label_l1_tol));
            }
            if let Some(emp) = summary.get("empirical_alpha") {
                let mut worst: f64 = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        let a = analytic["alpha_star"][i][j].as_str().and_then(|s| frac_f64(&json!(s)));
                        let e = emp[i][j].as_f64();
                        worst = match (a, e) {
                            (Some(a), Some(e)) => worst.max((a - e).abs()),
                            _ => f64::INFINITY,
                        };
                    }
                }
                out.push(Check::distance("alpha_max_entry", worst, args.alpha_tol));
            }
        }
        Some("2d") => {
            let d = analytic.get("D").and_then(vec_f64_fracs).unwrap_or_default();
            for (i, dref) in d.iter().enumerate() {
                let value = mean.get(i).copied().unwrap_or(f64::NAN);
                out.push(Check::rel(&format!("drift_{}", i + 1), value, *dref, args.drift_tol));
            }
            if let Some(ks) = summary.get("grid_ks").and_then(|g| g.get("max_cdf_diff")).and_then(Value::as_f64) {
                out.push(Check::distance("max_cdf_diff", ks, args.grid_tol));
            }
        }
        other => return usage(format!("unknown model {other:?} in summary")),
    }
    Ok(out)
}

fn vec_f64_fracs(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(frac_f64).collect()
}

/// Returns the process exit code.
pub fn run(args: &ReportArgs) -> CliResult<i32> {
    let summary = crate::output::read_json(&args.summary)?;
    let analytic = crate::output::read_json(&args.analytic)?;
    let checks = checks(args, &summary, &analytic)?;
    let all = !checks.is_empty() && checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{:<16} {}  value={:.6} reference={:.6} error={:.6} tolerance={}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.reference,
            c.error,
            c.tolerance
        );
    }
    let doc = json!({
        "model": summary["model"],
        "n": summary["n"],
        "count": summary["count"],
        "checks": checks,
        "pass": all,
    });
    if let Some(out) = &args.out {
        write_json(out, &doc)?;
    }
    Ok(if all { 0 } else { 1 })
}
