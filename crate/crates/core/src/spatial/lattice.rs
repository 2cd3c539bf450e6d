//! A stand-in contiguity for the 99 counties: names in alphabetical order
//! laid row by row on a 9 × 11 grid, with queen adjacency. It has the right
//! size and degree mix for tests and demos but is not the real map.

use crate::corpus::IOWA_COUNTIES;

pub const IOWA_LATTICE_COLS: usize = 11;

/// The lattice as shipped, in the adjacency file layout.
pub const IOWA_LATTICE_CSV: &str = include_str!("../../data/iowa_queen_lattice.csv");

/// Directed queen-contiguity pairs for `names` laid out row-major with
/// `cols` columns.
pub fn lattice_edges(names: &[&str], cols: usize) -> Vec<(String, String)> {
    let n = names.len();
    let rows = n.div_ceil(cols);
    let mut out = Vec::new();
    for i in 0..n {
        let (r, c) = ((i / cols) as isize, (i % cols) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (rr, cc) = (r + dr, c + dc);
                if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                    continue;
                }
                let j = rr as usize * cols + cc as usize;
                if j < n {
                    out.push((names[i].to_string(), names[j].to_string()));
                }
            }
        }
    }
    out
}

/// The 99-county lattice edges.
pub fn iowa_lattice() -> Vec<(String, String)> {
    lattice_edges(&IOWA_COUNTIES, IOWA_LATTICE_COLS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::SpatialWeights;

    fn render(edges: &[(String, String)]) -> String {
        let mut out = String::from("county_a,county_b\n");
        for (a, b) in edges {
            out.push_str(&format!("{a},{b}\n"));
        }
        out
    }

    #[test]
    fn shipped_file_matches_generator() {
        assert_eq!(IOWA_LATTICE_CSV, render(&iowa_lattice()));
    }

    #[test]
    fn ninety_nine_rows_sum_to_one() {
        let w = SpatialWeights::parse_adjacency(IOWA_LATTICE_CSV).unwrap();
        assert_eq!(w.len(), 99);
        for i in 0..99 {
            assert!((w.row_weights(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((3..=8).contains(&w.neighbors(i).len()));
        }
        assert!(w.isolates().is_empty());
    }
}
