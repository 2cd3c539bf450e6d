//! Synthetic design matrices with a known random-intercept probit truth.

use super::design::{DesignMatrix, COLUMN_NAMES};
use crate::seed;
use crate::stats;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Coefficients used as ground truth, in `COLUMN_NAMES` order.
pub const TABLE8_BETA: [f64; 22] = [
    -1.049, 0.329, 0.281, -0.063, 0.062, 0.033, 0.198, 0.620, -0.105, -0.020, 1.092, 1.067, 0.507, 0.291, 0.042,
    0.256, -0.018, -0.024, -0.018, -0.073, -0.013, -0.242,
];
pub const TABLE8_SIGMA: f64 = 0.23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedData {
    pub design: DesignMatrix,
    pub beta: Vec<f64>,
    pub sigma: f64,
    /// County intercepts `σ v_j` that generated the outcomes.
    pub county_effects: Vec<f64>,
}

/// One categorical factor: counts per level, reference level first. Each
/// non-reference level maps to a column index.
struct Factor {
    counts: &'static [f64],
    columns: &'static [usize],
}

const FACTORS: &[Factor] = &[
    Factor { counts: &[7268.0, 182.0, 340.0], columns: &[1, 2] },
    Factor { counts: &[2336.0, 5454.0], columns: &[3] },
    Factor { counts: &[3109.0, 4681.0], columns: &[4] },
    Factor { counts: &[1951.0, 5839.0], columns: &[5] },
    Factor { counts: &[4897.0, 1767.0, 832.0], columns: &[6, 7] },
    Factor { counts: &[6833.0, 201.0, 756.0], columns: &[8, 9] },
    Factor { counts: &[7562.0, 62.0, 166.0], columns: &[10, 11] },
    Factor { counts: &[4452.0, 3035.0, 303.0], columns: &[12, 13] },
    Factor { counts: &[801.0, 1524.0, 1531.0, 3934.0], columns: &[14, 15, 16] },
    Factor { counts: &[1808.0, 1632.0, 2585.0, 1765.0], columns: &[18, 19, 20] },
    Factor { counts: &[7012.0, 778.0], columns: &[21] },
];

fn draw_level(rng: &mut ChaCha8Rng, counts: &[f64]) -> usize {
    let total: f64 = counts.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, c) in counts.iter().enumerate() {
        if u < *c {
            return k;
        }
        u -= c;
    }
    counts.len() - 1
}

fn standardize(col: &mut [f64]) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

fn outcomes(columns: &[Vec<f64>], beta: &[f64], county: &[usize], effects: &[f64], rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..county.len())
        .map(|i| {
            let eta: f64 = columns.iter().zip(beta).map(|(c, b)| c[i] * b).sum::<f64>() + effects[county[i]];
            rng.random::<f64>() < stats::norm_cdf(eta)
        })
        .collect()
}

fn county_effects(n_counties: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n_counties)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            sigma * v
        })
        .collect()
}

fn assemble(
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    y: Vec<bool>,
    county: Vec<usize>,
    n_counties: usize,
) -> Result<DesignMatrix> {
    let p = names.len();
    let n = y.len();
    let dm = DesignMatrix::from_columns(
        names,
        columns,
        y,
        county,
        (0..n_counties).map(|c| format!("County{c:02}")).collect(),
        (0..n as i64).collect(),
    )?;
    if dm.n_cols() != p {
        let dropped: Vec<&str> = dm.dropped.iter().map(|(n, _)| n.as_str()).collect();
        return Err(Error::InvalidArgument(format!("simulated design lost columns {dropped:?}; increase n")));
    }
    Ok(dm)
}

/// Draws `n` rows over `n_counties` counties. Covariates follow the
/// observed category shares independently; the log-AADT column is standard
/// normal, standardized over the sample. Outcomes are
/// `y ~ Bernoulli(Φ(x'β + σ v_j))`.
pub fn simulate(n: usize, n_counties: usize, beta: &[f64], sigma: f64, seed: u64) -> Result<SimulatedData> {
    if beta.len() != COLUMN_NAMES.len() {
        return Err(Error::DimensionMismatch { expected: COLUMN_NAMES.len(), got: beta.len() });
    }
    if n_counties < 2 || n < 2 || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument("simulation needs n ≥ 2, ≥ 2 counties and σ ≥ 0".into()));
    }
    let mut rng = seed::rng(seed::labeled(seed, "simulate"));
    let effects = county_effects(n_counties, sigma, &mut rng);
    let mut columns = vec![vec![0.0; n]; COLUMN_NAMES.len()];
    columns[0].fill(1.0);
    let mut county = Vec::with_capacity(n);
    for i in 0..n {
        for f in FACTORS {
            let level = draw_level(&mut rng, f.counts);
            if level > 0 {
                columns[f.columns[level - 1]][i] = 1.0;
            }
        }
        columns[17][i] = StandardNormal.sample(&mut rng);
        county.push(rng.random_range(0..n_counties));
    }
    standardize(&mut columns[17]);
    let y = outcomes(&columns, beta, &county, &effects, &mut rng);
    let names = COLUMN_NAMES.iter().map(|s| s.to_string()).collect();
    let design = assemble(names, columns, y, county, n_counties)?;
    Ok(SimulatedData { design, beta: beta.to_vec(), sigma, county_effects: effects })
}

/// Small instance with an intercept, one binary and one continuous
/// covariate; sized for derivative checks.
pub fn simulate_small(n: usize, n_counties: usize, sigma: f64, seed: u64) -> SimulatedData {
    let mut rng = seed::rng(seed::labeled(seed, "simulate-small"));
    let beta = vec![-0.3, 0.6, 0.4];
    let effects = county_effects(n_counties, sigma, &mut rng);
    let mut columns = vec![vec![1.0; n], vec![0.0; n], vec![0.0; n]];
    let mut county = Vec::with_capacity(n);
    for i in 0..n {
        columns[1][i] = f64::from(u8::from(rng.random::<f64>() < 0.4));
        columns[2][i] = StandardNormal.sample(&mut rng);
        county.push(i % n_counties);
    }
    let y = outcomes(&columns, &beta, &county, &effects, &mut rng);
    let names = vec!["(Intercept)".to_string(), "x_binary".to_string(), "x_continuous".to_string()];
    let design = assemble(names, columns, y, county, n_counties).expect("small design keeps its columns");
    SimulatedData { design, beta, sigma, county_effects: effects }
}
