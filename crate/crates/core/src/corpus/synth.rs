//! Synthetic crash corpora with a known narrative truth and a controlled
//! amount of under-recorded alcohol involvement.
//!
//! Each record is generated from its own seeded substream, so output is
//! identical for a given spec regardless of thread count. A fixed share of
//! the truly alcohol-involved crashes is recorded as non-alcohol; which ones
//! are chosen depends on crash attributes and a county effect, so the
//! mismatch has structure for the downstream models to find.

use super::counties::IOWA_COUNTIES;
use super::record::*;
use super::{Dataset, Provenance};
use crate::seed;
use crate::stats::norm_cdf;
use crate::{Error, Result};
use chrono::{Datelike, Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Sampling weights for severity and county.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataWeights {
    pub severity: Vec<(Severity, f64)>,
    pub county: Vec<(String, f64)>,
}

impl Default for StrataWeights {
    /// Severity mix of Iowa crashes 2016–2022; all 99 counties equally likely.
    fn default() -> Self {
        StrataWeights {
            severity: vec![
                (Severity::PropertyDamageOnly, 268_779.0),
                (Severity::PossibleUnknown, 60_887.0),
                (Severity::MinorInjury, 33_300.0),
                (Severity::MajorInjury, 7_774.0),
                (Severity::Fatal, 1_936.0),
            ],
            county: IOWA_COUNTIES.iter().map(|c| (c.to_string(), 1.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_records: usize,
    /// Share of crashes whose narrative truly involves alcohol.
    pub alcohol_prevalence: f64,
    /// Share of truly alcohol-involved crashes recorded as NonAlcohol.
    pub injected_mismatch_rate: f64,
    pub seed: u64,
    pub strata_weights: StrataWeights,
    pub first_key: i64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_records: 10_000,
            alcohol_prevalence: 0.1,
            injected_mismatch_rate: 0.24,
            seed: 1,
            strata_weights: StrataWeights::default(),
            first_key: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        frac("alcohol_prevalence", self.alcohol_prevalence)?;
        frac("injected_mismatch_rate", self.injected_mismatch_rate)?;
        let weights_ok = |w: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = w.collect();
            !v.is_empty() && v.iter().all(|x| x.is_finite() && *x >= 0.0) && v.iter().sum::<f64>() > 0.0
        };
        if !weights_ok(&mut self.strata_weights.severity.iter().map(|w| w.1)) {
            return Err(Error::InvalidArgument("severity weights must be non-negative with a positive sum".into()));
        }
        if !weights_ok(&mut self.strata_weights.county.iter().map(|w| w.1)) {
            return Err(Error::InvalidArgument("county weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub true_label: AlcoholRel,
    /// True label Alcohol, recorded as NonAlcohol.
    pub flipped: bool,
}

pub type GroundTruth = BTreeMap<i64, TruthRow>;

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Coefficients of the latent mismatch propensity, on the probit scale.
mod propensity {
    pub const INTERCEPT: f64 = -1.049;
    pub const HEAVY_TRUCK: f64 = 0.329;
    pub const OTHER_VEHICLE: f64 = 0.281;
    pub const MALE: f64 = -0.063;
    pub const URBAN: f64 = 0.062;
    pub const NON_INTERSECTION: f64 = 0.033;
    pub const AGE_15_24: f64 = 0.198;
    pub const AGE_65: f64 = 0.620;
    pub const SPEED_UNDER_25: f64 = -0.105;
    pub const SPEED_OVER_55: f64 = -0.020;
    pub const BICYCLIST: f64 = 1.092;
    pub const PEDESTRIAN: f64 = 1.067;
    pub const DAYLIGHT: f64 = 0.507;
    pub const DUSK: f64 = 0.291;
    pub const MINOR: f64 = 0.042;
    pub const POSSIBLE: f64 = 0.256;
    pub const PDO: f64 = -0.018;
    pub const LOG_AADT: f64 = -0.024;
    pub const COLLECTOR: f64 = -0.018;
    pub const LOCAL: f64 = -0.073;
    pub const MAJOR: f64 = -0.013;
    pub const UNPROTECTED: f64 = -0.242;
    pub const COUNTY_SD: f64 = 0.23;
}

fn latent_propensity(r: &CrashRecord, county_effect: f64) -> f64 {
    use propensity::*;
    let mut eta = INTERCEPT + county_effect;
    eta += match r.vehicle_type {
        VehicleType::Car => 0.0,
        VehicleType::HeavyTruck => HEAVY_TRUCK,
        _ => OTHER_VEHICLE,
    };
    if r.driver_gender == Gender::Male {
        eta += MALE;
    }
    if r.rural_urban == RuralUrban::Urban {
        eta += URBAN;
    }
    if r.road_type == RoadType::NonIntersection {
        eta += NON_INTERSECTION;
    }
    eta += match r.age_band() {
        Some(AgeBand::From15To24) => AGE_15_24,
        Some(AgeBand::Over65) => AGE_65,
        _ => 0.0,
    };
    eta += match r.speed_limit_band {
        SpeedBand::Under25 => SPEED_UNDER_25,
        SpeedBand::Over55 => SPEED_OVER_55,
        SpeedBand::From25To55 => 0.0,
    };
    eta += match r.road_user {
        RoadUser::Bicyclist => BICYCLIST,
        RoadUser::Pedestrian => PEDESTRIAN,
        RoadUser::None => 0.0,
    };
    eta += match r.light {
        Light::Daylight => DAYLIGHT,
        Light::Dusk => DUSK,
        Light::Dark => 0.0,
    };
    eta += match r.severity {
        Severity::MinorInjury => MINOR,
        Severity::PossibleUnknown => POSSIBLE,
        Severity::PropertyDamageOnly => PDO,
        _ => 0.0,
    };
    if let Some(aadt) = r.aadt {
        eta += LOG_AADT * (aadt.ln() - 8.0) / 1.3;
    }
    eta += match r.functional_class {
        FunctionalClass::CollectorRoad => COLLECTOR,
        FunctionalClass::LocalRoad => LOCAL,
        FunctionalClass::MajorRoad => MAJOR,
        FunctionalClass::ArterialRoad => 0.0,
    };
    if r.unprotected {
        eta += UNPROTECTED;
    }
    eta
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let dist = WeightedIndex::new(items.iter().map(|i| i.1)).expect("validated weights");
    items[dist.sample(rng)].0
}

fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

mod phrases {
    pub const DIRECTIONS: &[&str] = &["north", "south", "east", "west"];
    pub const ROADS: &[&str] = &[
        "Highway 30", "Interstate 80", "County Road E18", "Main Street", "Grand Avenue", "the gravel road",
        "Highway 65", "First Avenue", "the frontage road", "Locust Street",
    ];
    pub const SURFACES: &[&str] = &["wet", "icy", "snow covered", "gravel", "dry"];
    pub const SIDES: &[&str] = &["north", "south", "east", "west", "right", "left"];
    pub const HONORIFICS: &[&str] = &["Officer", "Deputy", "Trooper", "Sgt."];
    pub const FIRST_NAMES: &[&str] = &[
        "John", "Mary", "James", "Linda", "Robert", "Patricia", "Michael", "Jennifer", "David", "Susan",
        "Sarah", "Thomas", "Karen", "Daniel", "Nancy", "Steven", "Emily", "Kevin", "Laura", "Brian",
    ];
    pub const SURNAMES: &[&str] = &[
        "Smith", "Johnson", "Miller", "Anderson", "Nelson", "Peterson", "Larson", "Olson", "Schmidt",
        "Meyer", "Hansen", "Wagner", "Becker", "Jensen", "Schultz", "Thompson",
    ];

    pub const SCENES: &[&str] = &[
        "Unit 1 was traveling {dir}bound on {road} when it struck unit 2 in the rear.",
        "Driver of unit 1 failed to yield at the intersection and collided with unit 2.",
        "The vehicle lost control on the {surface} pavement and entered the {side} ditch.",
        "Unit 2 was stopped at the traffic signal on {road} when unit 1 rear ended it.",
        "Driver stated a deer ran into the roadway and the vehicle struck it.",
        "The vehicle slid on the {surface} surface and struck a utility pole.",
        "Unit 1 backed out of a parking stall and hit unit 2.",
        "Witness stated unit 1 ran the red light and struck unit 2 broadside.",
        "Driver said the sun was in their eyes and did not see the stop sign.",
        "Unit 1 drifted across the center line on {road} and sideswiped unit 2.",
        "Driver was looking at a cell phone and left the roadway to the {side}.",
        "Unit 1 attempted to turn left and was struck by oncoming unit 2.",
        "Driver swerved to avoid debris and rolled the vehicle into the median.",
        "Unit 2 merged into the lane occupied by unit 1 on {road}.",
    ];
    pub const CLOSERS: &[&str] = &[
        "Both drivers were wearing seat belts.",
        "No injuries were reported at the scene.",
        "The vehicle was towed from the scene.",
        "Driver was transported to the hospital with minor injuries.",
        "Driver complained of neck pain.",
        "Airbags deployed in unit 1.",
    ];
    pub const ALCOHOL_CUES: &[&str] = &[
        "Driver was under the influence of alcohol.",
        "Officer detected a strong odor of an alcoholic beverage coming from the driver.",
        "Driver admitted to consuming several beers before the crash.",
        "Driver appeared impaired and failed standardized field sobriety tests.",
        "Driver was arrested for OWI after a preliminary breath test.",
        "Open containers of beer were found in the vehicle.",
        "Driver had bloodshot watery eyes and slurred speech and smelled of alcohol.",
        "Driver was intoxicated and was transported for a blood draw.",
        "Driver stated they had been drinking at a bar earlier that night.",
        "Driver refused chemical testing and was charged with OWI.",
    ];
    /// Non-alcohol narratives that nonetheless mention alcohol words.
    pub const DECOYS: &[&str] = &[
        "A passenger was intoxicated but the driver was sober and showed no signs of impairment.",
        "Driver denied drinking and the preliminary breath test was negative.",
    ];
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    use phrases::*;
    let mut s = template.to_string();
    for (slot, pool) in [("{dir}", DIRECTIONS), ("{road}", ROADS), ("{surface}", SURFACES), ("{side}", SIDES)] {
        while s.contains(slot) {
            s = s.replacen(slot, pool.choose(rng).unwrap(), 1);
        }
    }
    s
}

fn pii_sentence(rng: &mut ChaCha8Rng, date: NaiveDate) -> String {
    use phrases::*;
    match rng.random_range(0..5) {
        0 => format!(
            "{} {} responded to the scene and took statements.",
            HONORIFICS.choose(rng).unwrap(),
            SURNAMES.choose(rng).unwrap()
        ),
        1 => format!(
            "{} {} can be reached at {}-{}-{:04}.",
            FIRST_NAMES.choose(rng).unwrap(),
            SURNAMES.choose(rng).unwrap(),
            rng.random_range(200..1000),
            rng.random_range(200..1000),
            rng.random_range(0..10_000)
        ),
        2 => {
            let letters: String = (0..3).map(|_| rng.random_range(b'A'..=b'Z') as char).collect();
            format!("Unit 1 bearing plate {letters}{:04} was towed.", rng.random_range(0..10_000))
        }
        3 => format!("Report number {}.", rng.random_range(10_000_000u64..1_000_000_000)),
        _ => format!("Crash occurred on {}/{}/{}.", date.month(), date.day(), date.year()),
    }
}

fn narrative(rng: &mut ChaCha8Rng, alcohol: bool, date: NaiveDate) -> String {
    use phrases::*;
    let mut sentences = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        sentences.push(fill(SCENES.choose(rng).unwrap(), rng));
    }
    if alcohol {
        let n_cues = if chance(rng, 0.3) { 1 } else { rng.random_range(2..=3) };
        for cue in ALCOHOL_CUES.choose_multiple(rng, n_cues) {
            sentences.push(cue.to_string());
        }
    } else if chance(rng, 0.01) {
        sentences.push(DECOYS.choose(rng).unwrap().to_string());
    }
    for _ in 0..rng.random_range(0..=2) {
        sentences.push(CLOSERS.choose(rng).unwrap().to_string());
    }
    for _ in 0..rng.random_range(0..=2) {
        let at = rng.random_range(0..=sentences.len());
        sentences.insert(at, pii_sentence(rng, date));
    }
    sentences.join(" ")
}

struct Draft {
    record: CrashRecord,
    truly_alcohol: bool,
    flip_uniform: f64,
}

fn draft(spec: &SynthSpec, index: usize, county_effects: &BTreeMap<&str, f64>) -> (Draft, f64) {
    let mut rng = seed::rng(seed::substream(spec.seed, index as u64));
    let rng = &mut rng;

    let year = rng.random_range(2016..=2022);
    let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
    let days = if NaiveDate::from_ymd_opt(year, 2, 29).is_some() { 366 } else { 365 };
    let crash_date = start + Duration::days(rng.random_range(0..days));

    let county_weights: Vec<(&str, f64)> =
        spec.strata_weights.county.iter().map(|(c, w)| (c.as_str(), *w)).collect();
    let county = pick(rng, &county_weights);
    let severity = pick(rng, &spec.strata_weights.severity);

    let driver_gender = pick(rng, &[(Gender::Male, 0.55), (Gender::Female, 0.44), (Gender::Unknown, 0.01)]);
    let driver_age_years = if chance(rng, 0.01) {
        None
    } else {
        match pick(rng, &[(0u8, 0.23), (1, 0.63), (2, 0.14)]) {
            0 => Some(rng.random_range(15..=24)),
            1 => Some(rng.random_range(25..=64)),
            _ => Some(rng.random_range(65..=92)),
        }
    };
    let truly_alcohol = chance(rng, spec.alcohol_prevalence);
    let aadt = (rng.sample(Normal::new(8.0, 1.3).unwrap()) as f64).exp().round().max(1.0);

    let record = CrashRecord {
        crash_key: spec.first_key + index as i64,
        driver_gender,
        driver_age_years,
        county: county.to_string(),
        weather: pick(
            rng,
            &[
                (Weather::Clear, 0.75),
                (Weather::Cloudy, 0.15),
                (Weather::Rain, 0.07),
                (Weather::Snow, 0.025),
                (Weather::FogSmokeSmog, 0.008),
                (Weather::SevereWinds, 0.002),
            ],
        ),
        light: pick(rng, &[(Light::Daylight, 0.62), (Light::Dark, 0.33), (Light::Dusk, 0.05)]),
        road_type: pick(rng, &[(RoadType::Intersection, 0.3), (RoadType::NonIntersection, 0.7)]),
        severity,
        crash_year: year,
        crash_date,
        driver_distracted: chance(rng, 0.15),
        work_zone: chance(rng, 0.02),
        speed_limit_band: pick(
            rng,
            &[(SpeedBand::Under25, 0.05), (SpeedBand::From25To55, 0.85), (SpeedBand::Over55, 0.10)],
        ),
        alcohol_rel: AlcoholRel::from_bool(truly_alcohol),
        narration: narrative(rng, truly_alcohol, crash_date),
        vehicle_type: pick(
            rng,
            &[
                (VehicleType::Car, 0.88),
                (VehicleType::HeavyTruck, 0.04),
                (VehicleType::Motorcycle, 0.02),
                (VehicleType::OtherVehicle, 0.05),
                (VehicleType::Unknown, 0.01),
            ],
        ),
        road_user: pick(rng, &[(RoadUser::None, 0.97), (RoadUser::Pedestrian, 0.02), (RoadUser::Bicyclist, 0.01)]),
        unprotected: chance(rng, 0.08),
        season: Season::from_month(crash_date.month()),
        functional_class: pick(
            rng,
            &[
                (FunctionalClass::MajorRoad, 0.2),
                (FunctionalClass::ArterialRoad, 0.25),
                (FunctionalClass::CollectorRoad, 0.2),
                (FunctionalClass::LocalRoad, 0.35),
            ],
        ),
        rural_urban: pick(rng, &[(RuralUrban::Urban, 0.6), (RuralUrban::Rural, 0.4)]),
        aadt: Some(aadt),
    };
    let eta = latent_propensity(&record, county_effects.get(county).copied().unwrap_or(0.0));
    let flip_uniform = rng.random::<f64>();
    (Draft { record, truly_alcohol, flip_uniform }, eta)
}

/// Generates a dataset and its ground-truth sidecar.
///
/// Exactly `round(injected_mismatch_rate · n_true)` truly alcohol-involved
/// records are recorded as NonAlcohol, chosen by weighted sampling without
/// replacement with weight Φ(latent propensity).
pub fn synthesize(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;

    let mut effect_rng = seed::rng(seed::labeled(spec.seed, "county-effects"));
    let county_dist = Normal::new(0.0, propensity::COUNTY_SD).unwrap();
    let county_effects: BTreeMap<&str, f64> = spec
        .strata_weights
        .county
        .iter()
        .map(|(c, _)| (c.as_str(), effect_rng.sample(county_dist)))
        .collect();

    let drafts: Vec<(Draft, f64)> =
        (0..spec.n_records).into_par_iter().map(|i| draft(spec, i, &county_effects)).collect();

    // Efraimidis–Spirakis keys ln(u)/w: the k largest form a weighted sample.
    let mut candidates: Vec<(f64, usize)> = drafts
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| d.truly_alcohol)
        .map(|(i, (d, eta))| (d.flip_uniform.max(f64::MIN_POSITIVE).ln() / norm_cdf(*eta).max(1e-12), i))
        .collect();
    let n_flip = (spec.injected_mismatch_rate * candidates.len() as f64).round() as usize;
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut flip = vec![false; drafts.len()];
    for &(_, i) in candidates.iter().take(n_flip) {
        flip[i] = true;
    }

    let mut truth = GroundTruth::new();
    let mut records = Vec::with_capacity(drafts.len());
    for (i, (mut d, _)) in drafts.into_iter().enumerate() {
        if flip[i] {
            d.record.alcohol_rel = AlcoholRel::NonAlcohol;
        }
        truth.insert(
            d.record.crash_key,
            TruthRow { true_label: AlcoholRel::from_bool(d.truly_alcohol), flipped: flip[i] },
        );
        records.push(d.record);
    }

    let provenance = Provenance {
        sources: vec!["synthetic".into()],
        created: format!(
            "synthesize n={} prevalence={} mismatch={} seed={}",
            spec.n_records, spec.alcohol_prevalence, spec.injected_mismatch_rate, spec.seed
        ),
    };
    Ok(SynthOutput { dataset: Dataset::new(records, provenance)?, truth })
}

/// Ground-truth sidecar: `CRASH_KEY,TRUE_LABEL,FLIPPED`.
pub fn write_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut out = String::from("CRASH_KEY,TRUE_LABEL,FLIPPED\n");
    for (k, row) in truth {
        out.push_str(&format!("{k},{},{}\n", row.true_label, if row.flipped { "Yes" } else { "No" }));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
