//! Gauss–Hermite rules for ∫ e^{−x²} f(x) dx.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-point rule; nodes ascending. Roots of the Hermite polynomial are
    /// polished by Newton's method from asymptotic starting guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                // orthonormal Hermite recurrence
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_node_is_laplace() {
        let r = GaussHermite::new(1);
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn known_three_point_rule() {
        let r = GaussHermite::new(3);
        let a = (1.5f64).sqrt();
        assert!((r.nodes[0] + a).abs() < 1e-14 && r.nodes[1].abs() < 1e-15 && (r.nodes[2] - a).abs() < 1e-14);
        assert!((r.weights[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-14);
        assert!((r.weights[0] - PI.sqrt() / 6.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_even_moments_exactly() {
        // ∫ x^{2k} e^{−x²} = Γ(k + 1/2)
        for n in [5, 15, 25] {
            let r = GaussHermite::new(n);
            let mut gamma = PI.sqrt();
            for k in 0..n {
                let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(2 * k as i32)).sum();
                assert!((q - gamma).abs() <= 1e-12 * gamma, "n={n} k={k}: {q} vs {gamma}");
                gamma *= k as f64 + 0.5;
            }
        }
    }
}
