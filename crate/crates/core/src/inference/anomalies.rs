//! Pairs county intercepts with LISA anomaly clusters.

use super::glmm::GlmmFit;
use crate::spatial::{LisaCluster, LisaResult};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRow {
    pub county: String,
    pub blup: f64,
    pub cluster: LisaCluster,
}

/// Rows for counties whose cluster is one of the four significant types,
/// in county order. Every county in `lisa` must have a fitted intercept;
/// the fit may cover more counties than the LISA run.
pub fn report_anomalies(fit: &GlmmFit, lisa: &LisaResult) -> Result<Vec<AnomalyRow>> {
    let missing: Vec<&str> = lisa.rows.iter().map(|r| r.unit.as_str()).filter(|u| !fit.blups.contains_key(*u)).collect();
    if !missing.is_empty() {
        return Err(Error::KeyMismatch(format!(
            "{} LISA counties have no fitted intercept, e.g. {:?}",
            missing.len(),
            &missing[..missing.len().min(5)]
        )));
    }
    let mut rows: Vec<AnomalyRow> = lisa
        .rows
        .iter()
        .filter(|r| r.cluster.is_anomaly())
        .map(|r| AnomalyRow { county: r.unit.clone(), blup: fit.blups[&r.unit], cluster: r.cluster })
        .collect();
    rows.sort_by(|a, b| a.county.cmp(&b.county));
    Ok(rows)
}

pub fn render_anomalies(rows: &[AnomalyRow]) -> String {
    let mut out = String::from("County,BLUP,Cluster\n");
    for r in rows {
        out.push_str(&format!("{},{:.6},{}\n", r.county, r.blup, r.cluster));
    }
    out
}
