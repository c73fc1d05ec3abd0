//! Test suite effectiveness, Mann-Whitney U and the Vargha-Delaney effect size.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::archive::{Approach, Archive, ObjectiveId};
use crate::error::{contract, Result};

/// Largest combined sample size for which [`mann_whitney_u`] enumerates.
pub const EXACT_LIMIT: usize = 12;

/// Fraction of the `n` objectives covered by `archive`.
pub fn tse(archive: &Archive, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(contract("TSE over zero objectives"));
    }
    Ok(archive.len() as f64 / n as f64)
}

/// Outcome of one run, as summarized in the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub approach: Approach,
    pub env_id: String,
    pub seed: u64,
    pub tse: f64,
    pub covered: Vec<ObjectiveId>,
    pub tse_timeline: Vec<(u64, f64)>,
}

/// 1-based ranks, tied values sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: PMethod,
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(contract("statistics need two non-empty samples"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(contract("samples contain NaN"));
    }
    Ok(())
}

fn u_from_ranks(ranks: &[f64], n1: usize) -> f64 {
    let r1: f64 = ranks[..n1].iter().sum();
    r1 - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Two-sided Mann-Whitney U test. Exact when the samples hold at most
/// [`EXACT_LIMIT`] values together, normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    if a.len() + b.len() <= EXACT_LIMIT {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Exact p-value: enumerates every split of the pooled midranks into groups
/// of the two sample sizes.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (n1, n) = (a.len(), a.len() + b.len());
    if n > 30 {
        return Err(contract(format!("exact enumeration over {n} values is too large")));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let u = u_from_ranks(&ranks, n1);
    let mean = (n1 * (n - n1)) as f64 / 2.0;
    let observed = (u - mean).abs();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut combo: Vec<usize> = (0..n1).collect();
    loop {
        let r: f64 = combo.iter().map(|&i| ranks[i]).sum();
        total += 1;
        if ((r - offset) - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
        // Next n1-subset of 0..n in lexicographic order.
        let mut i = n1;
        loop {
            if i == 0 {
                let p = extreme as f64 / total as f64;
                return Ok(MannWhitney { u, p_two_sided: p.min(1.0), method: PMethod::Exact });
            }
            i -= 1;
            if combo[i] < n - n1 + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..n1 {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Normal approximation with tie and continuity corrections.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let u = u_from_ranks(&ranks, a.len());
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - n1 * n2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    Ok(MannWhitney { u, p_two_sided: p, method: PMethod::Normal })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    /// Label for an effect size, judged on its distance from 0.5.
    pub fn of(a12: f64) -> Self {
        let m = a12.max(1.0 - a12);
        if m > 0.71 {
            Magnitude::Large
        } else if m > 0.64 {
            Magnitude::Medium
        } else if m > 0.56 {
            Magnitude::Small
        } else {
            Magnitude::Negligible
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarghaDelaney {
    pub a12: f64,
    /// The same value as a fraction.
    pub exact: Ratio<u64>,
    pub magnitude: Magnitude,
}

/// Probability that a value drawn from `a` exceeds one drawn from `b`, ties
/// counting half.
pub fn vargha_delaney(a: &[f64], b: &[f64]) -> Result<VarghaDelaney> {
    check_samples(a, b)?;
    let (mut greater, mut equal) = (0u64, 0u64);
    for x in a {
        for y in b {
            if x > y {
                greater += 1;
            } else if x == y {
                equal += 1;
            }
        }
    }
    let exact = Ratio::new(2 * greater + equal, 2 * (a.len() * b.len()) as u64);
    let a12 = (2 * greater + equal) as f64 / (2 * a.len() * b.len()) as f64;
    Ok(VarghaDelaney { a12, exact, magnitude: Magnitude::of(a12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcase::TestCase;

    #[test]
    fn tse_examples() {
        let mut a = Archive::new();
        assert_eq!(tse(&a, 6).unwrap(), 0.0);
        for i in 0..3 {
            let mut t = TestCase::new("x", 0);
            t.push(Default::default(), crate::action::EnvAction::NoOp);
            a.offer(ObjectiveId(i), t);
        }
        assert_eq!(tse(&a, 6).unwrap(), 0.5);
        assert!(tse(&a, 0).is_err());
    }

    #[test]
    fn separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PMethod::Exact);
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [0.5, 0.5, 0.6667, 0.8333];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        let v = vargha_delaney(&a, &a).unwrap();
        assert_eq!(v.a12, 0.5);
        assert_eq!(v.magnitude, Magnitude::Negligible);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[1.0, 1.0, 2.0, 1.0, 2.0, 2.0]), vec![2.0, 2.0, 5.0, 2.0, 5.0, 5.0]);
    }

    #[test]
    fn constant_pool_normal_path() {
        let a = vec![1.0; 10];
        let r = mann_whitney_normal(&a, &a).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn dominance_is_large() {
        let v = vargha_delaney(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.a12, 1.0);
        assert_eq!(v.magnitude, Magnitude::Large);
    }

    #[test]
    fn thresholds_are_strict() {
        assert_eq!(Magnitude::of(0.56), Magnitude::Negligible);
        assert_eq!(Magnitude::of(0.5601), Magnitude::Small);
        assert_eq!(Magnitude::of(0.64), Magnitude::Small);
        assert_eq!(Magnitude::of(0.71), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.2), Magnitude::Large);
    }

    #[test]
    fn empty_samples_are_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(vargha_delaney(&[1.0], &[]).is_err());
    }
}
