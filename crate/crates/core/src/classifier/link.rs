use crate::stats;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Symmetric binary link, F(−a) = 1 − F(a).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logistic,
    Probit,
}

impl Link {
    pub fn cdf(self, a: f64) -> f64 {
        match self {
            Link::Logistic => stats::sigmoid(a),
            Link::Probit => stats::norm_cdf(a),
        }
    }

    pub fn log_cdf(self, a: f64) -> f64 {
        match self {
            Link::Logistic => stats::log_sigmoid(a),
            Link::Probit => stats::norm_log_cdf(a),
        }
    }

    /// First and second derivatives of ln F at `a`.
    pub fn log_cdf_d2(self, a: f64) -> (f64, f64) {
        let (d1, d2, _) = self.log_cdf_d3(a);
        (d1, d2)
    }

    /// First three derivatives of ln F at `a`.
    pub fn log_cdf_d3(self, a: f64) -> (f64, f64, f64) {
        match self {
            Link::Logistic => {
                let s = stats::sigmoid(a);
                let t = stats::sigmoid(-a);
                (t, -s * t, -s * t * (t - s))
            }
            Link::Probit => {
                let m = stats::inv_mills(a);
                let d2 = -m * (a + m);
                let d3 = -d2 * (a + m) - m * (1.0 + d2);
                (m, d2, d3)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logit" => Some(Link::Logistic),
            "probit" => Some(Link::Probit),
            _ => None,
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
