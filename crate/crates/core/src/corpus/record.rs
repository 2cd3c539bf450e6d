use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Lowercase alphanumerics only, so `"Possible/Unknown"`, `"possible_unknown"`
/// and `"PossibleUnknown"` compare equal.
fn label_key(s: &str) -> String {
    s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

macro_rules! categorical {
    (
        $(#[$meta:meta])*
        $name:ident {
            $( $variant:ident => $label:literal $( | $alias:literal )* ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $( $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[ $( $name::$variant ),+ ];

            /// Canonical label, as written to dataset files.
            pub fn as_str(self) -> &'static str {
                match self {
                    $( $name::$variant => $label ),+
                }
            }

            /// Accepts the canonical label and known aliases, ignoring case,
            /// whitespace and punctuation.
            pub fn parse(s: &str) -> Option<Self> {
                let key = label_key(s);
                $(
                    if key == label_key($label) $( || key == label_key($alias) )* {
                        return Some($name::$variant);
                    }
                )+
                None
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

categorical! {
    Gender {
        Male => "Male" | "M",
        Female => "Female" | "F",
        Unknown => "Unknown" | "" | "U" | "NA",
    }
}

categorical! {
    Weather {
        Clear => "Clear",
        Cloudy => "Cloudy",
        Rain => "Rain",
        Snow => "Snow",
        FogSmokeSmog => "FogSmokeSmog" | "Fog, smoke, smog" | "Fog",
        SevereWinds => "SevereWinds" | "Severe winds",
    }
}

categorical! {
    Light {
        Daylight => "Daylight",
        Dark => "Dark",
        Dusk => "Dusk",
    }
}

categorical! {
    RoadType {
        Intersection => "Intersection",
        NonIntersection => "NonIntersection",
    }
}

categorical! {
    /// KABCO severity.
    Severity {
        PropertyDamageOnly => "PropertyDamageOnly" | "Property Damage Only" | "PDO" | "O",
        PossibleUnknown => "PossibleUnknown" | "Possible/Unknown" | "Possible/Unknown Injury" | "C",
        MinorInjury => "MinorInjury" | "Minor Injury" | "B",
        MajorInjury => "MajorInjury" | "Major Injury" | "A",
        Fatal => "Fatal" | "K",
    }
}

categorical! {
    SpeedBand {
        Under25 => "Under25" | "<25 Mph" | "<25",
        From25To55 => "From25To55" | "25-55 Mph" | "25-55",
        Over55 => "Over55" | "over 55 Mph" | ">55",
    }
}

categorical! {
    AlcoholRel {
        Alcohol => "Alcohol" | "Alcohol-related" | "Alcohol related",
        NonAlcohol => "NonAlcohol" | "Non-Alcohol-related" | "Non-Alcohol related",
    }
}

categorical! {
    VehicleType {
        Car => "Car" | "Cars",
        HeavyTruck => "HeavyTruck" | "heavy_trucks" | "heavy trucks",
        Motorcycle => "Motorcycle" | "motorcycles",
        OtherVehicle => "OtherVehicle" | "other_vehicles" | "other vehicles",
        Unknown => "Unknown" | "",
    }
}

categorical! {
    RoadUser {
        None => "None" | "",
        Pedestrian => "Pedestrian" | "Pedestrians",
        Bicyclist => "Bicyclist" | "Bicyclists",
    }
}

categorical! {
    Season {
        Winter => "Winter",
        Spring => "Spring",
        Summer => "Summer",
        Fall => "Fall" | "Autumn",
    }
}

categorical! {
    FunctionalClass {
        MajorRoad => "MajorRoad" | "Major Roads",
        ArterialRoad => "ArterialRoad" | "Arterial Roads",
        CollectorRoad => "CollectorRoad" | "Collector Roads",
        LocalRoad => "LocalRoad" | "Local Roads",
    }
}

categorical! {
    RuralUrban {
        Urban => "Urban",
        Rural => "Rural",
    }
}

impl Season {
    /// Meteorological seasons: Dec–Feb winter, Mar–May spring, Jun–Aug
    /// summer, Sep–Nov fall.
    pub fn from_month(month: u32) -> Season {
        match month {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Fall,
        }
    }
}

impl AlcoholRel {
    pub fn is_alcohol(self) -> bool {
        self == AlcoholRel::Alcohol
    }

    pub fn from_bool(alcohol: bool) -> Self {
        if alcohol {
            AlcoholRel::Alcohol
        } else {
            AlcoholRel::NonAlcohol
        }
    }
}

/// Age band used at model time; raw ages are kept on the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    From15To24,
    From25To64,
    Over65,
}

impl AgeBand {
    /// `None` for ages below 15, which the model bands do not cover.
    pub fn of(age: u32) -> Option<AgeBand> {
        match age {
            0..=14 => None,
            15..=24 => Some(AgeBand::From15To24),
            25..=64 => Some(AgeBand::From25To64),
            _ => Some(AgeBand::Over65),
        }
    }
}

/// One joined crash row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub crash_key: i64,
    pub driver_gender: Gender,
    /// `None` when unknown.
    pub driver_age_years: Option<u32>,
    pub county: String,
    pub weather: Weather,
    pub light: Light,
    pub road_type: RoadType,
    pub severity: Severity,
    pub crash_year: i32,
    pub crash_date: NaiveDate,
    pub driver_distracted: bool,
    pub work_zone: bool,
    pub speed_limit_band: SpeedBand,
    pub alcohol_rel: AlcoholRel,
    pub narration: String,
    pub vehicle_type: VehicleType,
    pub road_user: RoadUser,
    pub unprotected: bool,
    pub season: Season,
    pub functional_class: FunctionalClass,
    pub rural_urban: RuralUrban,
    /// Vehicles per day; strictly positive when present.
    pub aadt: Option<f64>,
}

/// Column names, shared by the source tables and the joined dataset file.
pub mod columns {
    pub const CRASH_KEY: &str = "CRASH_KEY";
    pub const DRIVER_GEN: &str = "DRIVERGEN";
    pub const DRIVER_AGE: &str = "DRIVERAGE";
    pub const DRIVER_DIST: &str = "DRIVERDIST";
    pub const VEHICLE_TYPE: &str = "VEHICLE_TYPE";
    pub const ROAD_USER: &str = "ROAD_USER";
    pub const UNPROTECTED: &str = "UNPROTECTED";
    pub const COUNTY: &str = "COUNTY";
    pub const WEATHER: &str = "WEATHER";
    pub const LIGHT: &str = "LIGHT";
    pub const ROADTYPE: &str = "ROADTYPE";
    pub const CSEVERITY: &str = "CSEVERITY";
    pub const CRASH_YEAR: &str = "CRASH_YEAR";
    pub const CRASH_DATE: &str = "CRASH_DATE";
    pub const WZ_RELATED: &str = "WZ_RELATED";
    pub const SPEED_LIMIT: &str = "SPEED_LIMIT";
    pub const ALCOHOL_REL: &str = "ALCOHOL_REL";
    pub const SEASON: &str = "SEASON";
    pub const FUNCTIONAL_CLASS: &str = "FUNCTIONAL_CLASS";
    pub const RURALURBAN: &str = "RURALURBAN";
    pub const AADT: &str = "AADT";
    pub const CRASH_NARRATION: &str = "CRASH_NARRATION";

    pub const DRIVER_TABLE: &[&str] =
        &[CRASH_KEY, DRIVER_GEN, DRIVER_AGE, DRIVER_DIST, VEHICLE_TYPE, ROAD_USER, UNPROTECTED];
    pub const CRASH_TABLE: &[&str] = &[
        CRASH_KEY,
        COUNTY,
        WEATHER,
        LIGHT,
        ROADTYPE,
        CSEVERITY,
        CRASH_YEAR,
        CRASH_DATE,
        WZ_RELATED,
        SPEED_LIMIT,
        ALCOHOL_REL,
        SEASON,
        FUNCTIONAL_CLASS,
        RURALURBAN,
        AADT,
    ];
    pub const NARRATIVE_TABLE: &[&str] = &[CRASH_KEY, CRASH_NARRATION];
    /// SEASON may be omitted from inputs; it is then derived from the date.
    pub const OPTIONAL: &[&str] = &[SEASON];
}

fn parse_flag(raw: &str, yes: &[&str], no: &[&str]) -> Option<bool> {
    let key = label_key(raw);
    let matches = |set: &[&str]| set.iter().any(|s| label_key(s) == key);
    if matches(&["yes", "y", "true", "1"]) || matches(yes) {
        Some(true)
    } else if matches(&["no", "n", "false", "0"]) || matches(no) {
        Some(false)
    } else {
        None
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    ["%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(raw, fmt).ok())
}

/// Builds a record from named fields; the error string is the rejection
/// reason recorded in ingest reports.
pub(crate) fn record_from_fields<'a>(
    crash_key: i64,
    get: impl Fn(&str) -> Option<&'a str>,
) -> Result<CrashRecord, String> {
    use columns::*;

    let field = |name: &str| get(name).map(str::trim).unwrap_or("");
    fn enum_field<T>(name: &str, raw: &str, parse: fn(&str) -> Option<T>) -> Result<T, String> {
        parse(raw).ok_or_else(|| format!("invalid {name} value {raw:?}"))
    }

    let driver_gender = enum_field(DRIVER_GEN, field(DRIVER_GEN), Gender::parse)?;
    let driver_age_years = match field(DRIVER_AGE) {
        "" => None,
        s if label_key(s) == "unknown" => None,
        s => Some(s.parse::<u32>().map_err(|_| format!("invalid {DRIVER_AGE} value {s:?}"))?),
    };
    let county = field(COUNTY);
    if county.is_empty() {
        return Err(format!("missing {COUNTY}"));
    }
    let weather = enum_field(WEATHER, field(WEATHER), Weather::parse)?;
    let light = enum_field(LIGHT, field(LIGHT), Light::parse)?;
    let road_type = enum_field(ROADTYPE, field(ROADTYPE), RoadType::parse)?;
    let severity = enum_field(CSEVERITY, field(CSEVERITY), Severity::parse)?;
    let crash_date = parse_date(field(CRASH_DATE))
        .ok_or_else(|| format!("invalid {CRASH_DATE} value {:?}", field(CRASH_DATE)))?;
    let crash_year = match field(CRASH_YEAR) {
        "" => crash_date.year(),
        s => s.parse::<i32>().map_err(|_| format!("invalid {CRASH_YEAR} value {s:?}"))?,
    };
    if crash_year != crash_date.year() {
        return Err(format!("{CRASH_YEAR} {crash_year} inconsistent with {CRASH_DATE} {crash_date}"));
    }
    let driver_distracted = parse_flag(field(DRIVER_DIST), &["Driver Distracted", "Distracted"], &["Not Distracted"])
        .ok_or_else(|| format!("invalid {DRIVER_DIST} value {:?}", field(DRIVER_DIST)))?;
    let work_zone = parse_flag(field(WZ_RELATED), &["WorkZone", "Work Zone"], &["Non-Workzone", "Non-Work Zone"])
        .ok_or_else(|| format!("invalid {WZ_RELATED} value {:?}", field(WZ_RELATED)))?;
    let speed_limit_band = enum_field(SPEED_LIMIT, field(SPEED_LIMIT), SpeedBand::parse)?;
    let alcohol_rel = enum_field(ALCOHOL_REL, field(ALCOHOL_REL), AlcoholRel::parse)?;
    let vehicle_type = enum_field(VEHICLE_TYPE, field(VEHICLE_TYPE), VehicleType::parse)?;
    let road_user = enum_field(ROAD_USER, field(ROAD_USER), RoadUser::parse)?;
    let unprotected = parse_flag(field(UNPROTECTED), &[], &[])
        .ok_or_else(|| format!("invalid {UNPROTECTED} value {:?}", field(UNPROTECTED)))?;
    let derived_season = Season::from_month(crash_date.month());
    let season = match field(SEASON) {
        "" => derived_season,
        s => {
            let season = enum_field(SEASON, s, Season::parse)?;
            if season != derived_season {
                return Err(format!("{SEASON} {season} inconsistent with {CRASH_DATE} {crash_date}"));
            }
            season
        }
    };
    let functional_class = enum_field(FUNCTIONAL_CLASS, field(FUNCTIONAL_CLASS), FunctionalClass::parse)?;
    let rural_urban = enum_field(RURALURBAN, field(RURALURBAN), RuralUrban::parse)?;
    let aadt = match field(AADT) {
        "" => None,
        s => {
            let v = s.parse::<f64>().map_err(|_| format!("invalid {AADT} value {s:?}"))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{AADT} must be positive, got {s}"));
            }
            Some(v)
        }
    };

    Ok(CrashRecord {
        crash_key,
        driver_gender,
        driver_age_years,
        county: county.to_string(),
        weather,
        light,
        road_type,
        severity,
        crash_year,
        crash_date,
        driver_distracted,
        work_zone,
        speed_limit_band,
        alcohol_rel,
        narration: get(CRASH_NARRATION).unwrap_or("").to_string(),
        vehicle_type,
        road_user,
        unprotected,
        season,
        functional_class,
        rural_urban,
        aadt,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

impl CrashRecord {
    /// Value of a named column in canonical text form.
    pub fn field(&self, column: &str) -> String {
        use columns::*;
        match column {
            CRASH_KEY => self.crash_key.to_string(),
            DRIVER_GEN => self.driver_gender.to_string(),
            DRIVER_AGE => self.driver_age_years.map_or_else(|| "Unknown".to_string(), |a| a.to_string()),
            DRIVER_DIST => yes_no(self.driver_distracted).to_string(),
            VEHICLE_TYPE => self.vehicle_type.to_string(),
            ROAD_USER => self.road_user.to_string(),
            UNPROTECTED => yes_no(self.unprotected).to_string(),
            COUNTY => self.county.clone(),
            WEATHER => self.weather.to_string(),
            LIGHT => self.light.to_string(),
            ROADTYPE => self.road_type.to_string(),
            CSEVERITY => self.severity.to_string(),
            CRASH_YEAR => self.crash_year.to_string(),
            CRASH_DATE => self.crash_date.format("%Y-%m-%d").to_string(),
            WZ_RELATED => yes_no(self.work_zone).to_string(),
            SPEED_LIMIT => self.speed_limit_band.to_string(),
            ALCOHOL_REL => self.alcohol_rel.to_string(),
            SEASON => self.season.to_string(),
            FUNCTIONAL_CLASS => self.functional_class.to_string(),
            RURALURBAN => self.rural_urban.to_string(),
            AADT => self.aadt.map_or_else(String::new, |a| a.to_string()),
            CRASH_NARRATION => self.narration.clone(),
            other => panic!("unknown column {other}"),
        }
    }

    pub fn age_band(&self) -> Option<AgeBand> {
        self.driver_age_years.and_then(AgeBand::of)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_with_aliases() {
        assert_eq!(Severity::parse("Property Damage Only"), Some(Severity::PropertyDamageOnly));
        assert_eq!(Severity::parse("possible_unknown"), Some(Severity::PossibleUnknown));
        assert_eq!(Weather::parse("Fog, smoke, smog"), Some(Weather::FogSmokeSmog));
        assert_eq!(SpeedBand::parse("over 55 Mph"), Some(SpeedBand::Over55));
        assert_eq!(Gender::parse(""), Some(Gender::Unknown));
        assert_eq!(AlcoholRel::parse(""), None);
        assert_eq!(Light::parse("Twilight"), None);
        for s in Severity::ALL {
            assert_eq!(Severity::parse(s.as_str()), Some(*s));
        }
        assert_eq!(Severity::ALL.len(), 5);
    }

    #[test]
    fn seasons_follow_months() {
        let expect = [
            (1, Season::Winter),
            (2, Season::Winter),
            (3, Season::Spring),
            (5, Season::Spring),
            (6, Season::Summer),
            (8, Season::Summer),
            (9, Season::Fall),
            (11, Season::Fall),
            (12, Season::Winter),
        ];
        for (m, s) in expect {
            assert_eq!(Season::from_month(m), s, "month {m}");
        }
    }

    #[test]
    fn age_bands() {
        assert_eq!(AgeBand::of(14), None);
        assert_eq!(AgeBand::of(15), Some(AgeBand::From15To24));
        assert_eq!(AgeBand::of(24), Some(AgeBand::From15To24));
        assert_eq!(AgeBand::of(25), Some(AgeBand::From25To64));
        assert_eq!(AgeBand::of(64), Some(AgeBand::From25To64));
        assert_eq!(AgeBand::of(65), Some(AgeBand::Over65));
    }
}
