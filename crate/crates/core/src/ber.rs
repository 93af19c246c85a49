//! Monte-Carlo bit-error rates of the level decision and the cached table
//! the key-rate model reads from.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{run_round, ChannelConfig, DecisionRule};
use crate::error::{usage, Result};
use crate::rng::{derive_seed, round_seed, STREAM_BER};
use crate::stats::{wilson_interval, Interval};

/// Error rate of one decision rule at one γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub gamma: u32,
    pub rule: DecisionRule,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// Wilson 95% interval.
    pub ci: Interval,
}

/// Runs `trials` rounds with uniform random bits at the given γ and scores
/// every decision rule on the same rounds. Order of the result follows
/// [`DecisionRule::ALL`].
pub fn measure_ber(cfg: &ChannelConfig, trials: u64, seed: u64) -> Result<[BerPoint; 3]> {
    if trials == 0 {
        return Err(usage("BER measurement needs at least one trial"));
    }
    let base = derive_seed(derive_seed(seed, STREAM_BER), cfg.gamma() as u64);
    let errors = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = round_seed(base, t);
            let record = run_round(cfg, s & 1 == 1, s & 2 == 2, s);
            let truth = record.true_level();
            DecisionRule::ALL.map(|rule| u64::from(record.decision_under(cfg, rule) != truth))
        })
        .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);

    let mut out = Vec::with_capacity(3);
    for (rule, errors) in DecisionRule::ALL.into_iter().zip(errors) {
        out.push(BerPoint {
            gamma: cfg.gamma(),
            rule,
            trials,
            errors,
            error_rate: errors as f64 / trials as f64,
            ci: wilson_interval(errors, trials, 0.95)?,
        });
    }
    Ok(out.try_into().expect("three rules"))
}

/// Error rate as a function of γ for one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerTable {
    pub rule: DecisionRule,
    /// `(gamma, error_rate)` sorted by gamma.
    points: Vec<(u32, f64)>,
}

impl BerTable {
    /// Table of an error-free channel.
    pub fn ideal(rule: DecisionRule) -> Self {
        BerTable {
            rule,
            points: Vec::new(),
        }
    }

    pub fn from_points(rule: DecisionRule, mut points: Vec<(u32, f64)>) -> Result<Self> {
        if points.iter().any(|&(_, e)| !(0.0..=1.0).contains(&e)) {
            return Err(usage("error rates must lie in [0, 1]"));
        }
        points.sort_by_key(|&(g, _)| g);
        points.dedup_by_key(|&mut (g, _)| g);
        Ok(BerTable { rule, points })
    }

    /// Measures the table by Monte Carlo at each γ.
    pub fn measure(
        cfg: &ChannelConfig,
        rule: DecisionRule,
        gammas: &[u32],
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(gammas.len());
        for &g in gammas {
            let at = measure_ber(&cfg.with_gamma(g)?, trials, seed)?;
            let p = at
                .iter()
                .find(|p| p.rule == rule)
                .expect("all rules measured");
            points.push((g, p.error_rate));
        }
        BerTable::from_points(rule, points)
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    /// Error rate at `gamma`: exact hit, log-γ interpolation between
    /// neighbours, clamped to the end points outside the table. An empty
    /// table reads as error-free.
    pub fn lookup(&self, gamma: u32) -> f64 {
        let pts = &self.points;
        match pts.binary_search_by_key(&gamma, |&(g, _)| g) {
            Ok(i) => pts[i].1,
            Err(_) if pts.is_empty() => 0.0,
            Err(0) => pts[0].1,
            Err(i) if i == pts.len() => pts[i - 1].1,
            Err(i) => {
                let (g0, e0) = pts[i - 1];
                let (g1, e1) = pts[i];
                let w = ((gamma as f64).ln() - (g0 as f64).ln())
                    / ((g1 as f64).ln() - (g0 as f64).ln());
                e0 + w * (e1 - e0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup() {
        let t = BerTable::from_points(DecisionRule::Voltage, vec![(100, 0.01), (10, 0.1)]).unwrap();
        assert_eq!(t.lookup(10), 0.1);
        assert_eq!(t.lookup(100), 0.01);
        assert_eq!(t.lookup(5), 0.1);
        assert_eq!(t.lookup(1000), 0.01);
        let mid = t.lookup(31);
        assert!(mid < 0.1 && mid > 0.01);
        assert_eq!(BerTable::ideal(DecisionRule::Combined).lookup(50), 0.0);
        assert!(BerTable::from_points(DecisionRule::Voltage, vec![(10, 1.5)]).is_err());
    }

    #[test]
    fn ber_is_deterministic_and_ordered() {
        let cfg = ChannelConfig::default().with_gamma(10).unwrap();
        let a = measure_ber(&cfg, 2000, 9).unwrap();
        let b = measure_ber(&cfg, 2000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.map(|p| p.rule), DecisionRule::ALL);
        assert!(a.iter().all(|p| p.ci.contains(p.error_rate)));
        assert!(measure_ber(&cfg, 0, 9).is_err());
    }
}
