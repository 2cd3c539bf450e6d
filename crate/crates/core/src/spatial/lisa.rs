//! Local Moran's I with conditional permutation inference.
//!
//! `I_i = (z_i / m2) · Σ_j w_ij z_j` with `z = x − mean(x)` and
//! `m2 = Σ z² / n` over the units that carry a value. For the pseudo
//! p-value the focal value is held fixed and its neighbors are redrawn
//! without replacement from the other units. Both tails are counted and the
//! smaller count is doubled, `p = min(1, (2c + 1) / (n_perm + 1))`, so a
//! unit is flagged at level α with probability close to α under the null.

use super::SpatialWeights;
use crate::seed;
use crate::{Error, Result};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LisaConfig {
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for LisaConfig {
    fn default() -> Self {
        LisaConfig { n_perm: 999, alpha: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LisaCluster {
    HighHigh,
    LowLow,
    LowHigh,
    HighLow,
    NotSignificant,
    Isolate,
}

impl LisaCluster {
    pub fn as_str(self) -> &'static str {
        match self {
            LisaCluster::HighHigh => "High-High",
            LisaCluster::LowLow => "Low-Low",
            LisaCluster::LowHigh => "Low-High",
            LisaCluster::HighLow => "High-Low",
            LisaCluster::NotSignificant => "Not Significant",
            LisaCluster::Isolate => "Isolate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            LisaCluster::HighHigh,
            LisaCluster::LowLow,
            LisaCluster::LowHigh,
            LisaCluster::HighLow,
            LisaCluster::NotSignificant,
            LisaCluster::Isolate,
        ]
        .into_iter()
        .find(|c| c.as_str() == s.trim())
    }

    /// One of the four significant quadrant labels.
    pub fn is_anomaly(self) -> bool {
        matches!(self, LisaCluster::HighHigh | LisaCluster::LowLow | LisaCluster::LowHigh | LisaCluster::HighLow)
    }
}

impl fmt::Display for LisaCluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quadrant label from significance and the signs of the deviation and its
/// spatial lag. A zero on either side is not significant.
pub fn classify_cluster(significant: bool, deviation: f64, lag: f64) -> LisaCluster {
    if !significant {
        return LisaCluster::NotSignificant;
    }
    match (deviation.partial_cmp(&0.0), lag.partial_cmp(&0.0)) {
        (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Greater)) => LisaCluster::HighHigh,
        (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Less)) => LisaCluster::HighLow,
        (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Greater)) => LisaCluster::LowHigh,
        (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Less)) => LisaCluster::LowLow,
        _ => LisaCluster::NotSignificant,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LisaRow {
    pub unit: String,
    pub value: Option<f64>,
    pub deviation: f64,
    pub lag: f64,
    pub local_i: f64,
    pub pseudo_p: f64,
    pub cluster: LisaCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LisaResult {
    pub rows: Vec<LisaRow>,
    pub config: LisaConfig,
}

/// Local Moran's I for a value on every unit of `w` (no permutation).
/// Returns zeros for a constant field.
pub fn local_i_values(x: &[f64], w: &SpatialWeights) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / n;
    let constant = x.iter().all(|&v| v == x[0]);
    (0..x.len())
        .map(|i| {
            if constant {
                return 0.0;
            }
            let lag: f64 = w.neighbors(i).iter().zip(w.row_weights(i)).map(|(&j, wij)| wij * z[j]).sum();
            z[i] * lag / m2
        })
        .collect()
}

pub fn local_morans(x: &BTreeMap<String, f64>, w: &SpatialWeights, config: &LisaConfig) -> Result<LisaResult> {
    if config.n_perm < 99 {
        return Err(Error::InvalidArgument(format!("n_perm must be at least 99, got {}", config.n_perm)));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", config.alpha)));
    }
    if let Some(u) = x.keys().find(|u| w.index_of(u).is_none()) {
        return Err(Error::InvalidArgument(format!("value given for {u:?}, which is not in the weights")));
    }
    let values: Vec<Option<f64>> = w.units().iter().map(|u| x.get(u).copied()).collect();
    for (i, v) in values.iter().enumerate() {
        match v {
            None if !w.is_isolate(i) => {
                return Err(Error::InvalidArgument(format!("no value for non-isolate unit {:?}", w.units()[i])));
            }
            Some(v) if !v.is_finite() => {
                return Err(Error::InvalidArgument(format!("non-finite value for {:?}", w.units()[i])));
            }
            _ => {}
        }
    }
    let valued: Vec<usize> = (0..w.len()).filter(|&i| values[i].is_some()).collect();
    if valued.len() < 3 {
        return Err(Error::InvalidArgument(format!("local Moran's I needs at least 3 units with values, got {}", valued.len())));
    }

    let n = valued.len() as f64;
    let mean = valued.iter().map(|&i| values[i].unwrap()).sum::<f64>() / n;
    let z: Vec<f64> = values.iter().map(|v| v.map_or(0.0, |v| v - mean)).collect();
    let m2 = valued.iter().map(|&i| z[i] * z[i]).sum::<f64>() / n;
    let first = values[valued[0]].unwrap();
    let constant = valued.iter().all(|&i| values[i] == Some(first));

    let rows = (0..w.len())
        .into_par_iter()
        .map(|i| {
            let unit = w.units()[i].clone();
            let value = values[i];
            if w.is_isolate(i) {
                return LisaRow { unit, value, deviation: z[i], lag: 0.0, local_i: 0.0, pseudo_p: 1.0, cluster: LisaCluster::Isolate };
            }
            let nb = w.neighbors(i);
            let wt = w.row_weights(i);
            let lag: f64 = nb.iter().zip(wt).map(|(&j, wij)| wij * z[j]).sum();
            if constant {
                return LisaRow { unit, value, deviation: 0.0, lag: 0.0, local_i: 0.0, pseudo_p: 1.0, cluster: LisaCluster::NotSignificant };
            }
            let local_i = z[i] * lag / m2;
            let pool: Vec<usize> = valued.iter().copied().filter(|&j| j != i).collect();
            let mut rng = seed::rng(seed::substream(config.seed, i as u64));
            let (mut above, mut below) = (0usize, 0usize);
            for _ in 0..config.n_perm {
                let draw = index::sample(&mut rng, pool.len(), nb.len());
                let sim_lag: f64 = draw.iter().zip(wt).map(|(k, wij)| wij * z[pool[k]]).sum();
                let sim = z[i] * sim_lag / m2;
                if sim >= local_i {
                    above += 1;
                }
                if sim <= local_i {
                    below += 1;
                }
            }
            let c = above.min(below);
            let pseudo_p = ((2 * c + 1) as f64 / (config.n_perm + 1) as f64).min(1.0);
            let cluster = classify_cluster(pseudo_p <= config.alpha, z[i], lag);
            LisaRow { unit, value, deviation: z[i], lag, local_i, pseudo_p, cluster }
        })
        .collect();
    Ok(LisaResult { rows, config: *config })
}

impl LisaResult {
    pub fn get(&self, unit: &str) -> Option<&LisaRow> {
        self.rows.iter().find(|r| r.unit == unit)
    }

    pub fn significant(&self) -> impl Iterator<Item = &LisaRow> + '_ {
        self.rows.iter().filter(|r| r.cluster.is_anomaly())
    }

    /// County, cluster, p and local I at two decimals. With
    /// `significant_only`, rows are the anomalies ordered by p then name;
    /// otherwise every unit in weights order.
    pub fn render_table6(&self, significant_only: bool) -> String {
        let mut rows: Vec<&LisaRow> = if significant_only { self.significant().collect() } else { self.rows.iter().collect() };
        if significant_only {
            rows.sort_by(|a, b| a.pseudo_p.total_cmp(&b.pseudo_p).then_with(|| a.unit.cmp(&b.unit)));
        }
        let mut out = String::from("CountyName\tLISA cluster\tP values\tLocal Morans I\n");
        for r in rows {
            let _ = writeln!(out, "{}\t{}\t{:.2}\t{:.2}", r.unit, r.cluster, r.pseudo_p, r.local_i);
        }
        out
    }

    /// County to cluster label, the data behind a cluster map.
    pub fn render_map(&self) -> String {
        let mut out = String::from("County,Cluster\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.unit, r.cluster);
        }
        out
    }

    /// Full-precision rows for downstream stages.
    pub fn render_full(&self) -> String {
        let mut out = String::from("County,Value,Deviation,Lag,LocalI,PseudoP,Cluster\n");
        for r in &self.rows {
            let v = r.value.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(out, "{},{v},{:?},{:?},{:?},{:?},{}", r.unit, r.deviation, r.lag, r.local_i, r.pseudo_p, r.cluster);
        }
        out
    }

    pub fn parse_full(text: &str, config: LisaConfig) -> Result<Self> {
        let bad = |d: String| Error::format("lisa table", d);
        let mut lines = text.lines();
        if lines.next() != Some("County,Value,Deviation,Lag,LocalI,PseudoP,Cluster") {
            return Err(bad("missing header".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 7 {
                    return Err(bad(format!("bad row {l:?}")));
                }
                Ok(LisaRow {
                    unit: f[0].to_string(),
                    value: if f[1].is_empty() { None } else { Some(num(f[1])?) },
                    deviation: num(f[2])?,
                    lag: num(f[3])?,
                    local_i: num(f[4])?,
                    pseudo_p: num(f[5])?,
                    cluster: LisaCluster::parse(f[6]).ok_or_else(|| bad(format!("bad cluster {:?}", f[6])))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LisaResult { rows, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> SpatialWeights {
        let units: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            pairs.push((units[i].clone(), units[j].clone()));
            pairs.push((units[j].clone(), units[i].clone()));
        }
        SpatialWeights::from_pairs(&units, &pairs).unwrap()
    }

    fn values(w: &SpatialWeights, x: &[f64]) -> BTreeMap<String, f64> {
        w.units().iter().cloned().zip(x.iter().copied()).collect()
    }

    #[test]
    fn ring_of_four_by_hand() {
        // mean 2.5, z = (−1.5, −0.5, 0.5, 1.5), m2 = 1.25
        let w = ring(4);
        let r = local_morans(&values(&w, &[1.0, 2.0, 3.0, 4.0]), &w, &LisaConfig::default()).unwrap();
        let expect = [
            -1.5 * 0.5 * (-0.5 + 1.5) / 1.25,
            -0.5 * 0.5 * (-1.5 + 0.5) / 1.25,
            0.5 * 0.5 * (-0.5 + 1.5) / 1.25,
            1.5 * 0.5 * (0.5 - 1.5) / 1.25,
        ];
        for (row, e) in r.rows.iter().zip(expect) {
            assert!((row.local_i - e).abs() < 1e-15, "{} {e}", row.local_i);
        }
    }

    #[test]
    fn constant_field() {
        let w = ring(6);
        let r = local_morans(&values(&w, &[0.3; 6]), &w, &LisaConfig::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.local_i == 0.0 && row.cluster == LisaCluster::NotSignificant));
    }

    #[test]
    fn p_value_range_and_determinism() {
        let w = ring(12);
        let x: Vec<f64> = (0..12).map(|i| ((i * 7) % 12) as f64).collect();
        let cfg = LisaConfig { n_perm: 199, alpha: 0.05, seed: 9 };
        let a = local_morans(&values(&w, &x), &w, &cfg).unwrap();
        let b = local_morans(&values(&w, &x), &w, &cfg).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            assert!(row.pseudo_p >= 1.0 / 200.0 && row.pseudo_p <= 1.0);
            if row.cluster != LisaCluster::NotSignificant {
                assert!(row.pseudo_p <= cfg.alpha);
            }
        }
    }

    #[test]
    fn strong_cluster_detected() {
        // 9 x 11 queen lattice, first four rows high: interior units of each
        // block are High-High and Low-Low
        let w = SpatialWeights::parse_adjacency(crate::spatial::IOWA_LATTICE_CSV).unwrap();
        let x: Vec<f64> = (0..99).map(|i| if i < 44 { 1.0 } else { 0.0 } + (i as f64) * 1e-4).collect();
        let r = local_morans(&values(&w, &x), &w, &LisaConfig { seed: 1, ..Default::default() }).unwrap();
        assert!(r.rows[12].local_i > 0.0);
        assert_eq!(r.rows[12].cluster, LisaCluster::HighHigh);
        assert_eq!(r.rows[82].cluster, LisaCluster::LowLow);
    }

    #[test]
    fn cluster_rules_exhaustive() {
        use LisaCluster::*;
        let cases = [
            (true, 1.0, 1.0, HighHigh),
            (true, 1.0, -1.0, HighLow),
            (true, -1.0, 1.0, LowHigh),
            (true, -1.0, -1.0, LowLow),
            (false, 1.0, 1.0, NotSignificant),
            (false, 1.0, -1.0, NotSignificant),
            (false, -1.0, 1.0, NotSignificant),
            (false, -1.0, -1.0, NotSignificant),
        ];
        for (s, d, l, c) in cases {
            assert_eq!(classify_cluster(s, d, l), c);
        }
        assert_eq!(classify_cluster(true, 0.0, 1.0), NotSignificant);
    }

    #[test]
    fn guards() {
        let w = ring(4);
        let mut x = values(&w, &[1.0, 2.0, 3.0, 4.0]);
        assert!(local_morans(&x, &w, &LisaConfig { n_perm: 10, ..Default::default() }).is_err());
        x.remove("u0");
        assert!(local_morans(&x, &w, &LisaConfig::default()).is_err());
        let w2 = SpatialWeights::parse_adjacency("county_a,county_b\nA,B\nB,A\n").unwrap();
        let x2 = BTreeMap::from([("A".to_string(), 1.0), ("B".to_string(), 2.0)]);
        assert!(local_morans(&x2, &w2, &LisaConfig::default()).is_err());
    }

    #[test]
    fn isolates_are_labeled() {
        let w = SpatialWeights::parse_adjacency("county_a,county_b\nA,B\nB,A\nB,C\nC,B\nD,\n").unwrap();
        let x = BTreeMap::from([("A".into(), 1.0), ("B".into(), 2.0), ("C".into(), 5.0)]);
        let r = local_morans(&x, &w, &LisaConfig::default()).unwrap();
        let d = r.get("D").unwrap();
        assert_eq!(d.cluster, LisaCluster::Isolate);
        assert_eq!(d.value, None);
    }

    #[test]
    fn tables_roundtrip() {
        let w = ring(8);
        let x: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let cfg = LisaConfig::default();
        let r = local_morans(&values(&w, &x), &w, &cfg).unwrap();
        assert_eq!(LisaResult::parse_full(&r.render_full(), cfg).unwrap(), r);
        assert!(r.render_table6(false).starts_with("CountyName\tLISA cluster\tP values\tLocal Morans I\n"));
        assert_eq!(r.render_map().lines().count(), 9);
    }
}
