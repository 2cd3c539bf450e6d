use crate::{Error, Result};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

/// Row-standardized contiguity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    units: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl SpatialWeights {
    /// Builds weights from directed neighbor pairs. Every pair must appear
    /// in both directions; `units` lists every unit, including isolates.
    pub fn from_pairs(units: &[String], pairs: &[(String, String)]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.clone(), i).is_some() {
                return Err(Error::Weights(format!("unit {u:?} listed twice")));
            }
        }
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); units.len()];
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Weights(format!("self-neighbor {a:?}")));
            }
            let ia = *index.get(a).ok_or_else(|| Error::Weights(format!("unknown unit {a:?}")))?;
            let ib = *index.get(b).ok_or_else(|| Error::Weights(format!("unknown unit {b:?}")))?;
            sets[ia].insert(ib);
        }
        for (i, s) in sets.iter().enumerate() {
            if let Some(&j) = s.iter().find(|&&j| !sets[j].contains(&i)) {
                return Err(Error::Weights(format!(
                    "asymmetric adjacency: {:?} lists {:?} but not the reverse",
                    units[i], units[j]
                )));
            }
        }
        let neighbors: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let weights = neighbors.iter().map(|n| vec![1.0 / n.len() as f64; n.len()]).collect();
        Ok(SpatialWeights { units: units.to_vec(), index, neighbors, weights })
    }

    /// Reads a neighbor list with header `county_a,county_b`. A row whose
    /// second field is blank declares an isolate. Units are ordered by name.
    pub fn read_adjacency(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_adjacency(&text).map_err(|e| match e {
            Error::Weights(m) => Error::Weights(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse_adjacency(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut units = BTreeSet::new();
        let mut pairs = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Weights(e.to_string()))?;
            let a = row.get(0).unwrap_or("");
            let b = row.get(1).unwrap_or("");
            if a.is_empty() {
                if b.is_empty() {
                    continue;
                }
                return Err(Error::Weights(format!("row with blank first unit next to {b:?}")));
            }
            units.insert(a.to_string());
            if !b.is_empty() {
                units.insert(b.to_string());
                pairs.push((a.to_string(), b.to_string()));
            }
        }
        let units: Vec<String> = units.into_iter().collect();
        Self::from_pairs(&units, &pairs)
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn index_of(&self, unit: &str) -> Option<usize> {
        self.index.get(unit).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn row_weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn is_isolate(&self, i: usize) -> bool {
        self.neighbors[i].is_empty()
    }

    pub fn isolates(&self) -> Vec<&str> {
        (0..self.len()).filter(|&i| self.is_isolate(i)).map(|i| self.units[i].as_str()).collect()
    }

    /// Restricts to `keep` (in this order) and re-standardizes. Units that
    /// lose all their neighbors become isolates.
    pub fn subset(&self, keep: &[String]) -> Result<Self> {
        let kept: BTreeSet<&str> = keep.iter().map(String::as_str).collect();
        let mut pairs = Vec::new();
        for u in keep {
            let i = self.index_of(u).ok_or_else(|| Error::Weights(format!("unknown unit {u:?}")))?;
            for &j in &self.neighbors[i] {
                if kept.contains(self.units[j].as_str()) {
                    pairs.push((u.clone(), self.units[j].clone()));
                }
            }
        }
        Self::from_pairs(keep, &pairs)
    }

    /// Directed pairs in the file layout, isolates as `name,`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("county_a,county_b\n");
        for (i, u) in self.units.iter().enumerate() {
            if self.neighbors[i].is_empty() {
                out.push_str(&format!("{u},\n"));
            }
            for &j in &self.neighbors[i] {
                out.push_str(&format!("{u},{}\n", self.units[j]));
            }
        }
        out
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

    #[test]
    fn four_ring() {
        let w = ring(4);
        for i in 0..4 {
            assert_eq!(w.neighbors(i).len(), 2);
            assert_eq!(w.row_weights(i), &[0.5, 0.5]);
        }
    }

    #[test]
    fn isolates_and_validation() {
        let w = SpatialWeights::parse_adjacency("county_a,county_b\nA,B\nB,A\nC,\n").unwrap();
        assert_eq!(w.isolates(), vec!["C"]);
        assert!(matches!(SpatialWeights::parse_adjacency("county_a,county_b\nA,B\n"), Err(Error::Weights(_))));
        assert!(matches!(SpatialWeights::parse_adjacency("county_a,county_b\nA,A\n"), Err(Error::Weights(_))));
    }

    #[test]
    fn subset_restandardizes() {
        let w = ring(5);
        let keep: Vec<String> = ["u0", "u1", "u3"].iter().map(|s| s.to_string()).collect();
        let s = w.subset(&keep).unwrap();
        assert_eq!(s.row_weights(0), &[1.0]);
        assert!(s.is_isolate(2));
    }

    #[test]
    fn csv_roundtrip() {
        let w = SpatialWeights::parse_adjacency("county_a,county_b\nA,B\nB,A\nC,\n").unwrap();
        assert_eq!(SpatialWeights::parse_adjacency(&w.to_csv()).unwrap(), w);
    }
}
