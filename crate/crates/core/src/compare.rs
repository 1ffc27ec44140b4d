//! Paired comparison of two strategy arms over the same seeds. The fault
//! schedule depends only on the seed, so each pair sees identical faults.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::acl::AclVariant;
use crate::al::AlVariant;
use crate::metrics::{downtime_ticks, incidents, mttr};
use crate::scenario::{RunHeader, Scenario};
use crate::sim::{run, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub acl: AclVariant,
    pub al: BTreeSet<AlVariant>,
}

impl Arm {
    pub fn new(acl: AclVariant) -> Self {
        Arm { acl, al: BTreeSet::new() }
    }

    pub fn label(&self) -> String {
        let al: Vec<&str> = self.al.iter().map(|v| v.name()).collect();
        if al.is_empty() {
            self.acl.name().to_string()
        } else {
            format!("{}+{}", self.acl.name(), al.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub downtime_ticks: u64,
    pub mttr_minutes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub seed: u64,
    pub a: ArmMetrics,
    pub b: ArmMetrics,
}

/// One-sided sign test for "B is lower than A". Ties are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub b_lower: u64,
    pub b_higher: u64,
    pub ties: u64,
    pub mean_difference: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub arm_a: String,
    pub arm_b: String,
    pub rows: Vec<PairRow>,
    /// Absent for a single seed.
    pub downtime: Option<SignTest>,
    pub mttr: Option<SignTest>,
}

/// P(X >= k) for X ~ Binomial(n, 1/2).
pub fn sign_test_p(k: u64, n: u64) -> f64 {
    if n == 0 || k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(k - 1)
}

pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let b_lower = pairs.iter().filter(|(a, b)| b < a).count() as u64;
    let b_higher = pairs.iter().filter(|(a, b)| b > a).count() as u64;
    let ties = pairs.len() as u64 - b_lower - b_higher;
    let mean_difference =
        if pairs.is_empty() { 0.0 } else { pairs.iter().map(|(a, b)| b - a).sum::<f64>() / pairs.len() as f64 };
    SignTest { b_lower, b_higher, ties, mean_difference, p_value: sign_test_p(b_lower, b_lower + b_higher) }
}

fn arm_metrics(scenario: &Scenario, seed: u64, arm: &Arm) -> Result<ArmMetrics, SimError> {
    let out = run(&RunHeader::new(scenario.clone(), seed, arm.acl, arm.al.clone()))?;
    Ok(ArmMetrics { downtime_ticks: downtime_ticks(&out.trace), mttr_minutes: mttr(&incidents(&out.trace)) })
}

/// Runs both arms on every seed. Seeds are independent, so they are spread
/// over `threads` workers; results keep the seed order.
pub fn compare(scenario: &Scenario, seeds: &[u64], a: &Arm, b: &Arm, threads: usize) -> Result<ComparisonReport, SimError> {
    let threads = threads.clamp(1, seeds.len().max(1));
    let chunk = seeds.len().div_ceil(threads).max(1);
    let rows: Vec<Result<PairRow, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| Ok(PairRow { seed, a: arm_metrics(scenario, seed, a)?, b: arm_metrics(scenario, seed, b)? }))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (downtime, mttr) = if rows.len() < 2 {
        (None, None)
    } else {
        let d: Vec<(f64, f64)> = rows.iter().map(|r| (r.a.downtime_ticks as f64, r.b.downtime_ticks as f64)).collect();
        // A run without incidents recovered from nothing; count it as zero.
        let m: Vec<(f64, f64)> =
            rows.iter().map(|r| (r.a.mttr_minutes.unwrap_or(0.0), r.b.mttr_minutes.unwrap_or(0.0))).collect();
        (Some(sign_test(&d)), Some(sign_test(&m)))
    };
    Ok(ComparisonReport { scenario: scenario.name.clone(), arm_a: a.label(), arm_b: b.label(), rows, downtime, mttr })
}

fn fmt_mttr(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |m| format!("{m:.1}"))
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "compare {} : A={} B={}", self.scenario, self.arm_a, self.arm_b);
        let _ = writeln!(s, "{:>8} {:>10} {:>10} {:>9} {:>9}", "seed", "down_A", "down_B", "mttr_A", "mttr_B");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>8} {:>10} {:>10} {:>9} {:>9}",
                r.seed,
                r.a.downtime_ticks,
                r.b.downtime_ticks,
                fmt_mttr(r.a.mttr_minutes),
                fmt_mttr(r.b.mttr_minutes)
            );
        }
        for (name, t) in [("downtime", &self.downtime), ("mttr", &self.mttr)] {
            match t {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "{name}: B lower in {}, higher in {}, ties {}; mean B-A {:.3}; sign test p={:.3e}",
                        t.b_lower, t.b_higher, t.ties, t.mean_difference, t.p_value
                    );
                }
                None => {
                    let _ = writeln!(s, "{name}: single seed, no test");
                }
            }
        }
        s
    }
}
