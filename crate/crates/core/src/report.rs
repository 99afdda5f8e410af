//! Fixed-precision text output: posteriors, risk curves and heatmaps as CSV,
//! and rounded JSON values.

use std::fmt::Write;

use serde_json::{json, Map, Value};

use crate::inference::PosteriorResult;
use crate::risk::{HeatmapCell, IndividualRisk};

pub const SIGNIFICANT_DIGITS: usize = 7;

/// `v` with 7 significant digits. Fixed notation in `[1e-4, 1e7)`, scientific
/// otherwise.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-4..7).contains(&magnitude) {
        return format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// `v` rounded to 7 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v.is_finite() {
        format_sig(v).parse().expect("formatted number parses")
    } else {
        v
    }
}

fn rounded(v: f64) -> Value {
    if v.is_finite() {
        json!(round_sig(v))
    } else {
        Value::Null
    }
}

/// Log-evidence for output. Magnitudes below 1e-12 are summation noise around
/// log 1 and print as 0, so engines agree after rounding.
pub fn report_log_evidence(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// `{"log_evidence", "marginals": {id: {"00", "01", "10", "11", "carrier"}}}` with
/// rounded values; `log_evidence` is null and `explanation` set when the
/// evidence is impossible.
pub fn posterior_json(result: &PosteriorResult) -> Value {
    let mut marginals = Map::new();
    for (k, (id, m)) in result.ids.iter().zip(&result.marginals).enumerate() {
        marginals.insert(
            id.clone(),
            json!({
                "00": rounded(m[0]),
                "01": rounded(m[1]),
                "10": rounded(m[2]),
                "11": rounded(m[3]),
                "carrier": rounded(result.carrier_probability(k)),
            }),
        );
    }
    let mut out = Map::new();
    out.insert("log_evidence".into(), rounded(report_log_evidence(result.log_evidence)));
    out.insert("marginals".into(), Value::Object(marginals));
    if let Some(e) = &result.explanation {
        out.insert("explanation".into(), json!(e));
    }
    Value::Object(out)
}

pub fn posterior_csv(result: &PosteriorResult) -> String {
    let mut out = String::from("id,00,01,10,11,carrier\n");
    for (k, (id, m)) in result.ids.iter().zip(&result.marginals).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            id,
            format_sig(m[0]),
            format_sig(m[1]),
            format_sig(m[2]),
            format_sig(m[3]),
            format_sig(result.carrier_probability(k))
        );
    }
    out
}

/// One row per grid point per individual. The competing-risk column is empty
/// when no death hazard was used.
pub fn risk_csv(risks: &[IndividualRisk]) -> String {
    let mut out = String::from("id,age,risk_no_competing,risk_competing,posterior_carrier,posterior_hazard\n");
    for r in risks {
        let c = &r.curve;
        for k in 0..c.len() {
            let with = c
                .risk_competing
                .as_ref()
                .map(|w| format_sig(w[k]))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.id,
                format_sig(c.ages[k]),
                format_sig(c.risk_no_competing[k]),
                with,
                format_sig(c.posterior_carrier[k]),
                format_sig(c.posterior_hazard[k])
            );
        }
    }
    out
}

pub fn risk_json(risks: &[IndividualRisk]) -> Value {
    let round_all = |v: &[f64]| v.iter().map(|x| rounded(*x)).collect::<Vec<_>>();
    Value::Array(
        risks
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "pi": rounded(r.pi),
                    "tau": rounded(r.tau),
                    "ages": round_all(&r.curve.ages),
                    "risk_no_competing": round_all(&r.curve.risk_no_competing),
                    "risk_competing": r.curve.risk_competing.as_deref().map(round_all),
                    "posterior_carrier": round_all(&r.curve.posterior_carrier),
                    "posterior_hazard": round_all(&r.curve.posterior_hazard),
                })
            })
            .collect(),
    )
}

pub fn heatmap_csv(cells: &[HeatmapCell]) -> String {
    let mut out = String::from("pi,tau,risk_no_competing,risk_competing,difference\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig(c.pi),
            format_sig(c.tau),
            format_sig(c.risk_no_competing),
            format_sig(c.risk_competing),
            format_sig(c.difference)
        );
    }
    out
}
