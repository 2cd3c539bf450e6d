use crate::audit::{MismatchCategory, MismatchLabel};
use crate::corpus::{AgeBand, CrashRecord, Dataset, FunctionalClass, Gender, Light, RoadType, RoadUser, RuralUrban, Severity, SpeedBand, VehicleType};
use crate::seed;
use crate::{Error, Result};
use rand::seq::index;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Column names in model order, intercept first.
pub const COLUMN_NAMES: [&str; 22] = [
    "(Intercept)",
    "vehicle_typeheavy_trucks",
    "vehicle_typeother_vehicles",
    "InjuredGender-Male",
    "Location-Urban",
    "RoadtypeNon-Intersection",
    "DRIVERAGEAge 15 to 24 years",
    "DRIVERAGEAge 65 years and above",
    "SpeedLimit <25 Mph",
    "SpeedLimit over 55 Mph",
    "Road user-bicyclists",
    "Road user-Pedestrians",
    "LightCondition-Daylight",
    "LightCondition-Dusk",
    "Crash Severity-MinorInjury",
    "Crash Severity-Possible/UnknownInjury",
    "Crash Severity-Property Damage Only",
    "Log AADT scaled",
    "Functional Class-CollectorRoads",
    "Functional Class-LocalRoads",
    "Functional Class-MajorRoad",
    "Unprotected Persons-Yes",
];

const AADT_COLUMN: usize = 17;

/// Equal numbers of AIM and NonAIM crashes, keys in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSample {
    pub rows: Vec<(i64, bool)>,
    pub seed: u64,
}

impl BalancedSample {
    pub fn aim_count(&self) -> usize {
        self.rows.iter().filter(|r| r.1).count()
    }

    pub fn non_aim_count(&self) -> usize {
        self.rows.len() - self.aim_count()
    }
}

/// Keeps the smaller of the AIM and NonAIM groups whole and draws the same
/// number from the larger one without replacement.
pub fn balance(labels: &[MismatchLabel], ds: &Dataset, seed: u64) -> Result<BalancedSample> {
    let mut aim = Vec::new();
    let mut non_aim = Vec::new();
    for l in labels {
        if !ds.contains(l.crash_key) {
            return Err(Error::KeyMismatch(format!("label for crash {} has no record", l.crash_key)));
        }
        match l.category {
            MismatchCategory::Aim => aim.push(l.crash_key),
            MismatchCategory::NonAim => non_aim.push(l.crash_key),
            MismatchCategory::NotApplicable => {}
        }
    }
    if aim.is_empty() || non_aim.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cannot balance: {} AIM and {} NonAIM crashes",
            aim.len(),
            non_aim.len()
        )));
    }
    let k = aim.len().min(non_aim.len());
    let mut rng = seed::rng(seed);
    let draw = |keys: &[i64], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<i64> {
        if keys.len() == k {
            return keys.to_vec();
        }
        let mut picked: Vec<usize> = index::sample(rng, keys.len(), k).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| keys[i]).collect()
    };
    let aim = draw(&aim, &mut rng);
    let non_aim = draw(&non_aim, &mut rng);
    let mut chosen: HashMap<i64, bool> = aim.into_iter().map(|k| (k, true)).collect();
    chosen.extend(non_aim.into_iter().map(|k| (k, false)));
    let rows = ds.iter().filter_map(|r| chosen.get(&r.crash_key).map(|&y| (r.crash_key, y))).collect();
    Ok(BalancedSample { rows, seed })
}

/// How levels without a column of their own are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// When set, MajorInjury severity and Motorcycle/Unknown vehicles are
    /// errors instead of being pooled with Fatal and OtherVehicle.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    /// Row-major, `n_rows × names.len()`.
    pub x: Vec<f64>,
    pub y: Vec<bool>,
    /// County index of each row into `counties`.
    pub county: Vec<usize>,
    pub counties: Vec<String>,
    pub keys: Vec<i64>,
    /// Columns removed for being constant or duplicating another.
    pub dropped: Vec<(String, String)>,
    /// Sample rows left out, with the reason.
    pub rejected: Vec<(i64, String)>,
    pub log_aadt_mean: f64,
    pub log_aadt_sd: f64,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[i * p..(i + 1) * p]
    }

    /// Builds a matrix from raw columns, dropping constant and duplicate
    /// columns (other than the intercept in column 0).
    pub fn from_columns(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        y: Vec<bool>,
        county: Vec<usize>,
        counties: Vec<String>,
        keys: Vec<i64>,
    ) -> Result<Self> {
        let n = y.len();
        if columns.iter().any(|c| c.len() != n) || county.len() != n || keys.len() != n || names.len() != columns.len() {
            return Err(Error::InvalidArgument("design columns disagree in length".into()));
        }
        if let Some(&c) = county.iter().find(|&&c| c >= counties.len()) {
            return Err(Error::InvalidArgument(format!("county index {c} out of range")));
        }
        let mut kept: Vec<usize> = Vec::new();
        let mut dropped = Vec::new();
        for (j, col) in columns.iter().enumerate() {
            if j > 0 && col.iter().all(|&v| v == col[0]) {
                dropped.push((names[j].clone(), "constant".to_string()));
            } else if let Some(&k) = kept.iter().find(|&&k| columns[k] == *col) {
                dropped.push((names[j].clone(), format!("identical to {}", names[k])));
            } else {
                kept.push(j);
            }
        }
        let p = kept.len();
        let mut x = vec![0.0; n * p];
        for i in 0..n {
            for (c, &j) in kept.iter().enumerate() {
                x[i * p + c] = columns[j][i];
            }
        }
        Ok(DesignMatrix {
            names: kept.iter().map(|&j| names[j].clone()).collect(),
            x,
            y,
            county,
            counties,
            keys,
            dropped,
            rejected: Vec::new(),
            log_aadt_mean: 0.0,
            log_aadt_sd: 1.0,
        })
    }
}

/// Why a record cannot be encoded, or `Ok` if it can.
pub fn encodable(r: &CrashRecord, options: &EncodeOptions) -> std::result::Result<(), String> {
    if r.driver_gender == Gender::Unknown {
        return Err("driver gender unknown".into());
    }
    match r.driver_age_years {
        None => return Err("driver age unknown".into()),
        Some(a) if AgeBand::of(a).is_none() => return Err(format!("driver age {a} below 15")),
        _ => {}
    }
    match r.aadt {
        None => return Err("AADT missing".into()),
        Some(v) if !(v > 0.0 && v.is_finite()) => return Err(format!("AADT {v} not positive")),
        _ => {}
    }
    if options.strict {
        if r.severity == Severity::MajorInjury {
            return Err(Error::UnseenLevel { factor: "severity".into(), level: r.severity.to_string() }.to_string());
        }
        if matches!(r.vehicle_type, VehicleType::Motorcycle | VehicleType::Unknown) {
            return Err(Error::UnseenLevel { factor: "vehicle_type".into(), level: r.vehicle_type.to_string() }.to_string());
        }
    }
    Ok(())
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Dummy codes a record; the log-AADT slot holds the raw logarithm.
fn raw_row(r: &CrashRecord) -> [f64; 22] {
    let age = r.driver_age_years.and_then(AgeBand::of);
    [
        1.0,
        ind(r.vehicle_type == VehicleType::HeavyTruck),
        ind(matches!(r.vehicle_type, VehicleType::OtherVehicle | VehicleType::Motorcycle | VehicleType::Unknown)),
        ind(r.driver_gender == Gender::Male),
        ind(r.rural_urban == RuralUrban::Urban),
        ind(r.road_type == RoadType::NonIntersection),
        ind(age == Some(AgeBand::From15To24)),
        ind(age == Some(AgeBand::Over65)),
        ind(r.speed_limit_band == SpeedBand::Under25),
        ind(r.speed_limit_band == SpeedBand::Over55),
        ind(r.road_user == RoadUser::Bicyclist),
        ind(r.road_user == RoadUser::Pedestrian),
        ind(r.light == Light::Daylight),
        ind(r.light == Light::Dusk),
        ind(r.severity == Severity::MinorInjury),
        ind(r.severity == Severity::PossibleUnknown),
        ind(r.severity == Severity::PropertyDamageOnly),
        r.aadt.map_or(f64::NAN, f64::ln),
        ind(r.functional_class == FunctionalClass::CollectorRoad),
        ind(r.functional_class == FunctionalClass::LocalRoad),
        ind(r.functional_class == FunctionalClass::MajorRoad),
        ind(r.unprotected),
    ]
}

/// Dummy codes the sample against fixed reference levels (Car, Female,
/// Rural, Intersection, 25–64, 25–55 mph, no vulnerable road user, Dark,
/// Fatal, ArterialRoad, protected) and standardizes log-AADT.
///
/// `counties` fixes the county universe and its order; counties without
/// sample rows still get an index. Rows that cannot be encoded are
/// recorded in `rejected`, except unseen levels under `strict`, which fail.
pub fn encode(sample: &BalancedSample, ds: &Dataset, counties: &[String], options: &EncodeOptions) -> Result<DesignMatrix> {
    let county_index: HashMap<&str, usize> = counties.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut raw: Vec<[f64; 22]> = Vec::new();
    let (mut y, mut county, mut keys, mut rejected) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &(key, outcome) in &sample.rows {
        let r = ds.get(key).ok_or_else(|| Error::KeyMismatch(format!("sample crash {key} has no record")))?;
        if options.strict {
            if r.severity == Severity::MajorInjury {
                return Err(Error::UnseenLevel { factor: "severity".into(), level: r.severity.to_string() });
            }
            if matches!(r.vehicle_type, VehicleType::Motorcycle | VehicleType::Unknown) {
                return Err(Error::UnseenLevel { factor: "vehicle_type".into(), level: r.vehicle_type.to_string() });
            }
        }
        if let Err(reason) = encodable(r, options) {
            rejected.push((key, reason));
            continue;
        }
        let c = *county_index
            .get(r.county.as_str())
            .ok_or_else(|| Error::UnseenLevel { factor: "county".into(), level: r.county.clone() })?;
        raw.push(raw_row(r));
        y.push(outcome);
        county.push(c);
        keys.push(key);
    }
    let n = raw.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("only {n} encodable rows in the sample")));
    }
    let mean = raw.iter().map(|r| r[AADT_COLUMN]).sum::<f64>() / n as f64;
    let sd = (raw.iter().map(|r| (r[AADT_COLUMN] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut columns: Vec<Vec<f64>> = (0..22).map(|j| raw.iter().map(|r| r[j]).collect()).collect();
    columns[AADT_COLUMN] = raw.iter().map(|r| if sd > 0.0 { (r[AADT_COLUMN] - mean) / sd } else { 0.0 }).collect();

    let names = COLUMN_NAMES.iter().map(|s| s.to_string()).collect();
    let mut dm = DesignMatrix::from_columns(names, columns, y, county, counties.to_vec(), keys)?;
    dm.rejected = rejected;
    dm.log_aadt_mean = mean;
    dm.log_aadt_sd = sd;
    Ok(dm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize, Provenance, SynthSpec};

    fn records(n: usize) -> Vec<CrashRecord> {
        synthesize(&SynthSpec { n_records: n, seed: 11, ..Default::default() })
            .unwrap()
            .dataset
            .records()
            .iter()
            .filter(|r| encodable(r, &EncodeOptions::default()).is_ok())
            .cloned()
            .collect()
    }

    fn labels(ds: &Dataset, aim_every: usize) -> Vec<MismatchLabel> {
        ds.iter()
            .enumerate()
            .map(|(i, r)| MismatchLabel {
                crash_key: r.crash_key,
                category: if i % aim_every == 0 { MismatchCategory::Aim } else { MismatchCategory::NonAim },
            })
            .collect()
    }

    #[test]
    fn balance_rules() {
        let ds = Dataset::new(records(400)[..20].to_vec(), Provenance::default()).unwrap();
        let b = balance(&labels(&ds, 2), &ds, 1).unwrap();
        assert_eq!(b.rows.len(), 20);
        let ds = Dataset::new(records(400)[..105].to_vec(), Provenance::default()).unwrap();
        let l: Vec<MismatchLabel> = labels(&ds, 1000)
            .into_iter()
            .enumerate()
            .map(|(i, mut l)| {
                l.category = if i < 5 { MismatchCategory::Aim } else { MismatchCategory::NonAim };
                l
            })
            .collect();
        let b = balance(&l, &ds, 3).unwrap();
        assert_eq!((b.aim_count(), b.non_aim_count()), (5, 5));
        assert_eq!(b, balance(&l, &ds, 3).unwrap());
        let only_aim: Vec<MismatchLabel> = l.iter().filter(|l| l.category == MismatchCategory::Aim).copied().collect();
        assert!(balance(&only_aim, &ds, 3).is_err());
    }

    #[test]
    fn reference_row_and_dummies() {
        let mut recs = records(3000);
        let mut reference = recs[0].clone();
        reference.vehicle_type = VehicleType::Car;
        reference.driver_gender = Gender::Female;
        reference.rural_urban = RuralUrban::Rural;
        reference.road_type = RoadType::Intersection;
        reference.driver_age_years = Some(40);
        reference.speed_limit_band = SpeedBand::From25To55;
        reference.road_user = RoadUser::None;
        reference.light = Light::Dark;
        reference.severity = Severity::Fatal;
        reference.functional_class = FunctionalClass::ArterialRoad;
        reference.unprotected = false;
        let mut daylight = reference.clone();
        daylight.light = Light::Daylight;
        daylight.crash_key = -2;
        recs[0] = reference;
        recs.push(daylight);
        let ds = Dataset::new(recs, Provenance::default()).unwrap();
        let l = labels(&ds, 2);
        let sample = BalancedSample { rows: l.iter().map(|l| (l.crash_key, l.category == MismatchCategory::Aim)).collect(), seed: 0 };
        let counties: Vec<String> = crate::corpus::IOWA_COUNTIES.iter().map(|s| s.to_string()).collect();
        let dm = encode(&sample, &ds, &counties, &EncodeOptions::default()).unwrap();
        assert_eq!(dm.n_cols(), 22, "dropped: {:?}", dm.dropped);
        let r0 = dm.row(0);
        assert_eq!(r0[0], 1.0);
        for (j, v) in r0.iter().enumerate().skip(1) {
            if j != AADT_COLUMN {
                assert_eq!(*v, 0.0, "{}", dm.names[j]);
            }
        }
        let last = dm.row(dm.n_rows() - 1);
        let diff: Vec<usize> = (0..22).filter(|&j| r0[j] != last[j]).collect();
        assert_eq!(diff, vec![12]);
        let col: Vec<f64> = (0..dm.n_rows()).map(|i| dm.row(i)[AADT_COLUMN]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_and_duplicate_columns_dropped() {
        let names = vec!["(Intercept)".into(), "a".into(), "b".into(), "c".into()];
        let cols = vec![vec![1.0; 4], vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, 1.0], vec![2.0; 4]];
        let dm = DesignMatrix::from_columns(names, cols, vec![true, false, true, false], vec![0; 4], vec!["X".into()], vec![1, 2, 3, 4]).unwrap();
        assert_eq!(dm.names, vec!["(Intercept)", "a"]);
        assert_eq!(dm.dropped.len(), 2);
    }

    #[test]
    fn strict_mode_rejects_pooled_levels() {
        let mut recs = records(200);
        recs[0].severity = Severity::MajorInjury;
        let ds = Dataset::new(recs, Provenance::default()).unwrap();
        let l = labels(&ds, 2);
        let sample = BalancedSample { rows: l.iter().map(|l| (l.crash_key, l.category == MismatchCategory::Aim)).collect(), seed: 0 };
        let counties: Vec<String> = crate::corpus::IOWA_COUNTIES.iter().map(|s| s.to_string()).collect();
        let err = encode(&sample, &ds, &counties, &EncodeOptions { strict: true }).unwrap_err();
        assert!(matches!(err, Error::UnseenLevel { .. }));
        assert!(encode(&sample, &ds, &counties, &EncodeOptions::default()).is_ok());
    }
}
