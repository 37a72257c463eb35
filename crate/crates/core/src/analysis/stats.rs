//! Mann-Whitney U test.
//!
//! Small samples (combined size up to [`EXACT_LIMIT`]) use the exact
//! permutation distribution of U over the observed (tie-averaged) ranks.
//! Larger samples use the normal approximation with tie-corrected variance
//! and a continuity correction of 0.5.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Group A is stochastically larger than group B.
    #[default]
    AGreater,
    TwoSided,
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a-greater" | "a_greater" | "greater" => Ok(Alternative::AGreater),
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            other => Err(Error::invalid(format!("unknown alternative `{other}`"))),
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::AGreater => "a_greater",
            Alternative::TwoSided => "two_sided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    pub u_a: f64,
    pub u_b: f64,
    pub p: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of the concatenation `a ++ b`, plus the tie term
/// `Σ (t³ - t)` over tie groups.
fn average_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let values: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

pub fn mann_whitney(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann-Whitney U needs two nonempty groups"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("Mann-Whitney U input contains NaN"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ranks, ties) = average_ranks(a, b);
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    let u_b = na * nb - u_a;

    let (p, exact) = if a.len() + b.len() <= EXACT_LIMIT {
        (exact_p(&ranks, a.len(), u_a, alternative), true)
    } else {
        (normal_p(na, nb, u_a, ties, alternative), false)
    };
    Ok(MannWhitney { u_a, u_b, p, exact })
}

fn exact_p(ranks: &[f64], na: usize, u_obs: f64, alternative: Alternative) -> f64 {
    let n = ranks.len();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let mean = (na * (n - na)) as f64 / 2.0;
    let eps = 1e-9;
    let mut total = 0u64;
    let mut extreme = 0u64;
    for subset in 0u32..(1 << n) {
        if subset.count_ones() as usize != na {
            continue;
        }
        let u: f64 = (0..n)
            .filter(|i| subset & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum::<f64>()
            - offset;
        total += 1;
        let hit = match alternative {
            Alternative::AGreater => u >= u_obs - eps,
            Alternative::TwoSided => (u - mean).abs() >= (u_obs - mean).abs() - eps,
        };
        if hit {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

fn normal_p(na: f64, nb: f64, u: f64, ties: f64, alternative: Alternative) -> f64 {
    let n = na + nb;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var.is_nan() || var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    match alternative {
        Alternative::AGreater => std_normal.sf((u - mean - 0.5) / sd),
        Alternative::TwoSided => (2.0 * std_normal.sf(((u - mean).abs() - 0.5) / sd)).min(1.0),
    }
}
