//! Misdetection probability and exact recovery rate over a batch of trials.

use std::collections::BTreeSet;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub true_support: Vec<usize>,
    pub est_support: Vec<usize>,
    pub wall_time_s: f64,
}

impl TrialOutcome {
    pub fn new(true_support: Vec<usize>, est_support: Vec<usize>, wall_time_s: f64) -> Self {
        Self { true_support, est_support, wall_time_s }
    }

    /// Active devices absent from the estimate.
    pub fn misses(&self) -> usize {
        let est: BTreeSet<_> = self.est_support.iter().collect();
        self.true_support.iter().filter(|i| !est.contains(i)).count()
    }

    pub fn miss_fraction(&self) -> f64 {
        self.misses() as f64 / self.true_support.len() as f64
    }

    pub fn exact(&self) -> bool {
        let t: BTreeSet<_> = self.true_support.iter().collect();
        let e: BTreeSet<_> = self.est_support.iter().collect();
        t == e
    }

    /// Fraction of inactive devices reported active, for a population of `n_devices`.
    pub fn false_alarm_rate(&self, n_devices: usize) -> f64 {
        let t: BTreeSet<_> = self.true_support.iter().collect();
        let inactive = n_devices.saturating_sub(t.len());
        if inactive == 0 {
            return 0.0;
        }
        let fa = self.est_support.iter().collect::<BTreeSet<_>>().difference(&t).count();
        fa as f64 / inactive as f64
    }
}

fn check(outcomes: &[TrialOutcome]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(invalid("no trial outcomes to aggregate"));
    }
    if outcomes.iter().any(|o| o.true_support.is_empty()) {
        return Err(invalid("every trial needs at least one active device"));
    }
    Ok(())
}

/// Average over trials of the fraction of active devices that were missed.
pub fn pmd(outcomes: &[TrialOutcome]) -> Result<f64> {
    check(outcomes)?;
    Ok(outcomes.iter().map(TrialOutcome::miss_fraction).sum::<f64>() / outcomes.len() as f64)
}

/// Fraction of trials whose estimated set equals the true set.
pub fn err(outcomes: &[TrialOutcome]) -> Result<f64> {
    check(outcomes)?;
    Ok(outcomes.iter().filter(|o| o.exact()).count() as f64 / outcomes.len() as f64)
}

pub fn mean_false_alarm(outcomes: &[TrialOutcome], n_devices: usize) -> Result<f64> {
    check(outcomes)?;
    Ok(outcomes.iter().map(|o| o.false_alarm_rate(n_devices)).sum::<f64>() / outcomes.len() as f64)
}

/// Binomial standard error of a rate `p` estimated from `n` Bernoulli draws.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(t: &[usize], e: &[usize]) -> TrialOutcome {
        TrialOutcome::new(t.to_vec(), e.to_vec(), 0.0)
    }

    #[test]
    fn examples() {
        let perfect = vec![o(&[1, 2], &[2, 1]), o(&[5], &[5])];
        assert_eq!(pmd(&perfect).unwrap(), 0.0);
        assert_eq!(err(&perfect).unwrap(), 1.0);
        assert_eq!(pmd(&[o(&[1, 2, 3, 4], &[1, 2])]).unwrap(), 0.5);
        assert_eq!(err(&[o(&[1], &[2]), o(&[3], &[4])]).unwrap(), 0.0);
        let mut batch = vec![o(&[1], &[1]); 7];
        batch.extend(vec![o(&[1], &[2]); 3]);
        assert!((err(&batch).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn errors_on_empty_input() {
        assert!(pmd(&[]).is_err());
        assert!(err(&[]).is_err());
        assert!(pmd(&[o(&[], &[1])]).is_err());
    }

    #[test]
    fn mixed_batch_matches_recount() {
        let batch = vec![
            o(&[0, 4, 9], &[0, 4, 9]),
            o(&[0, 4, 9], &[0, 4, 8]),
            o(&[2, 3], &[5, 6]),
            o(&[7], &[7]),
            o(&[1, 2, 3, 4], &[1, 2, 3, 5]),
            o(&[10, 11], &[11, 12]),
            o(&[6], &[3]),
            o(&[3, 8], &[8, 3]),
            o(&[0, 1, 2], &[0, 1, 2]),
            o(&[5, 9], &[9, 1]),
        ];
        let mut acc = 0.0;
        for t in &batch {
            let missed = t.true_support.iter().filter(|i| !t.est_support.contains(i)).count();
            acc += missed as f64 / t.true_support.len() as f64;
        }
        assert!((pmd(&batch).unwrap() - acc / 10.0).abs() < 1e-15);
        assert!((err(&batch).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn false_alarm_rate() {
        let t = o(&[0, 1], &[1, 2, 3]);
        assert!((t.false_alarm_rate(10) - 2.0 / 8.0).abs() < 1e-15);
    }
}
