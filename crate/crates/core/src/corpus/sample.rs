use super::{CrashRecord, Dataset};
use crate::seed;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Categorical field used to define strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrataField {
    AlcoholRel,
    Severity,
    County,
    Year,
    RuralUrban,
}

impl StrataField {
    fn key(self, r: &CrashRecord) -> String {
        match self {
            StrataField::AlcoholRel => r.alcohol_rel.to_string(),
            StrataField::Severity => r.severity.to_string(),
            StrataField::County => r.county.clone(),
            StrataField::Year => r.crash_year.to_string(),
            StrataField::RuralUrban => r.rural_urban.to_string(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alcohol_rel" => Some(StrataField::AlcoholRel),
            "severity" | "cseverity" => Some(StrataField::Severity),
            "county" => Some(StrataField::County),
            "year" | "crash_year" => Some(StrataField::Year),
            "ruralurban" | "rural_urban" => Some(StrataField::RuralUrban),
            _ => None,
        }
    }
}

/// Largest-remainder allocation of `n` over stratum sizes: every quota is the
/// floor or ceiling of its exact proportional share. Ties go to the earlier
/// stratum.
pub(crate) fn allocate(n: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| n * s / total).collect();
    let mut remainders: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(i, &s)| (n * s % total, i)).collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - quota.iter().sum::<usize>();
    for &(_, i) in remainders.iter().take(short) {
        quota[i] += 1;
    }
    quota
}

/// Proportionally stratified sample of `n` records without replacement.
///
/// Within each stratum, members are shuffled with a stratum-specific seeded
/// stream and the first `quota` are kept. The sample preserves dataset order.
pub fn stratified_sample(ds: &Dataset, n: usize, field: StrataField, seed: u64) -> Result<Dataset> {
    if n > ds.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} exceeds population {}",
            ds.len()
        )));
    }
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.iter().enumerate() {
        strata.entry(field.key(r)).or_default().push(i);
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = allocate(n, &sizes);

    let mut chosen = Vec::with_capacity(n);
    for (h, (members, quota)) in strata.into_values().zip(quotas).enumerate() {
        let mut members = members;
        members.shuffle(&mut seed::rng(seed::substream(seed, h as u64)));
        chosen.extend_from_slice(&members[..quota]);
    }
    chosen.sort_unstable();
    Ok(ds.select(&chosen, format!("stratified sample n={n} seed={seed}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize, AlcoholRel, SynthSpec};

    #[test]
    fn allocation_is_within_one_of_proportional() {
        let sizes = [50, 50];
        assert_eq!(allocate(10, &sizes), vec![5, 5]);
        let sizes = [7, 13, 1, 979];
        for n in [0, 1, 17, 500, 1000] {
            let q = allocate(n, &sizes);
            assert_eq!(q.iter().sum::<usize>(), n);
            for (qi, si) in q.iter().zip(sizes) {
                let exact = n as f64 * si as f64 / 1000.0;
                assert!((*qi as f64 - exact).abs() < 1.0, "{qi} vs {exact}");
            }
        }
    }

    #[test]
    fn full_sample_keeps_everyone() {
        let ds = synthesize(&SynthSpec { n_records: 200, ..SynthSpec::default() }).unwrap().dataset;
        let s = stratified_sample(&ds, ds.len(), StrataField::Severity, 4).unwrap();
        let a: Vec<i64> = ds.iter().map(|r| r.crash_key).collect();
        let b: Vec<i64> = s.iter().map(|r| r.crash_key).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn too_large_is_an_error() {
        let ds = synthesize(&SynthSpec { n_records: 20, ..SynthSpec::default() }).unwrap().dataset;
        assert!(stratified_sample(&ds, 21, StrataField::AlcoholRel, 0).is_err());
    }

    #[test]
    fn training_sample_sized_like_the_review_sample() {
        let ds = synthesize(&SynthSpec { n_records: 30_000, seed: 11, ..SynthSpec::default() })
            .unwrap()
            .dataset;
        let s = stratified_sample(&ds, 8_914, StrataField::AlcoholRel, 2).unwrap();
        assert_eq!(s.len(), 8_914);
        let pop_alc = ds.iter().filter(|r| r.alcohol_rel == AlcoholRel::Alcohol).count() as f64;
        let got_alc = s.iter().filter(|r| r.alcohol_rel == AlcoholRel::Alcohol).count() as f64;
        let expect = 8_914.0 * pop_alc / ds.len() as f64;
        assert!((got_alc - expect).abs() < 1.0, "{got_alc} vs {expect}");
        let again = stratified_sample(&ds, 8_914, StrataField::AlcoholRel, 2).unwrap();
        assert!(s.iter().zip(again.iter()).all(|(a, b)| a.crash_key == b.crash_key));
    }
}
