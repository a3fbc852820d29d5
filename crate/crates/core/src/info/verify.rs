use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{sample_with, ChainSpec};
use super::DiscreteJoint;
use crate::error::{invalid, Result};
use crate::rng::{stream, Purpose};

/// Slack below `-TOLERANCE` counts as a violation.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: u64,
    pub slack: f64,
    pub joint: DiscreteJoint,
}

/// Outcome of checking one inequality on many random chains. Slack is the
/// larger side minus the smaller side; it is non-negative when the claim holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub claim: String,
    pub trials: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub median_slack: f64,
    pub max_slack: f64,
    pub runtime_seconds: f64,
    pub violating: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn run(
    claim: &str,
    trials: u64,
    seed: u64,
    draw: impl Fn(&mut rand_chacha::ChaCha20Rng) -> ChainSpec,
    slack: impl Fn(&DiscreteJoint) -> Result<f64>,
) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(invalid("verification needs at least one trial"));
    }
    let start = Instant::now();
    let mut slacks = Vec::with_capacity(trials as usize);
    let mut violating = Vec::new();
    for trial in 0..trials {
        // per-trial streams make the report independent of evaluation order
        let mut rng = stream(seed, trial, Purpose::Theory);
        let spec = draw(&mut rng);
        let joint = sample_with(&spec, &mut rng)?;
        let s = slack(&joint)?;
        if !(s >= -TOLERANCE) {
            violating.push(Violation { trial, slack: s, joint });
        }
        slacks.push(s);
    }
    slacks.sort_by(f64::total_cmp);
    Ok(VerifyReport {
        claim: claim.to_string(),
        trials,
        violations: violating.len() as u64,
        min_slack: slacks[0],
        median_slack: slacks[slacks.len() / 2],
        max_slack: slacks[slacks.len() - 1],
        runtime_seconds: start.elapsed().as_secs_f64(),
        violating,
    })
}

/// `I(X; S) ≥ I(X; xi)` on chains `X → S → xi` with alphabets of 2 to 4 symbols.
pub fn verify_lemma1_dpi(trials: u64, seed: u64) -> Result<VerifyReport> {
    run(
        "I(X;S) >= I(X;xi)",
        trials,
        seed,
        |rng| ChainSpec::single(rng.random_range(2..=4), rng.random_range(2..=4), rng.random_range(2..=4)),
        dpi_slack,
    )
}

pub(crate) fn dpi_slack(j: &DiscreteJoint) -> Result<f64> {
    Ok(j.mutual_info(&["X"], &["S"])? - j.mutual_info(&["X"], &["xi"])?)
}

/// `I(xi; S) ≥ I(xi; o1) + I(xi; o2 | o1) − I(o1; o2 | xi)` on chains
/// `(o1, o2) → S → xi` with alphabets of 2 or 3 symbols.
pub fn verify_theorem2(trials: u64, seed: u64) -> Result<VerifyReport> {
    run(
        "I(xi;S) >= I(xi;o1) + I(xi;o2|o1) - I(o1;o2|xi)",
        trials,
        seed,
        |rng| {
            ChainSpec::two_sensors(
                rng.random_range(2..=3),
                rng.random_range(2..=3),
                rng.random_range(2..=3),
                rng.random_range(2..=3),
            )
        },
        sensor_gain_slack,
    )
}

pub(crate) fn sensor_gain_slack(j: &DiscreteJoint) -> Result<f64> {
    let old = j.mutual_info(&["xi"], &["o1"])?;
    let new = j.cond_mutual_info(&["xi"], &["o2"], &["o1"])?;
    let obs = j.cond_mutual_info(&["o1"], &["o2"], &["xi"])?;
    Ok(j.mutual_info(&["xi"], &["S"])? - (old + new - obs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_chains_satisfy_both_claims() {
        let r = verify_lemma1_dpi(200, 3).unwrap();
        assert!(r.passed() && r.min_slack >= -TOLERANCE, "{r:?}");
        let r = verify_theorem2(200, 3).unwrap();
        assert!(r.passed() && r.min_slack >= -TOLERANCE, "{r:?}");
        assert_eq!(r.trials, 200);
        assert!(r.min_slack <= r.median_slack && r.median_slack <= r.max_slack);
    }

    #[test]
    fn dpi_edge_cases() {
        // S = X: I(X;S) = H(X) and the slack is H(X) − I(X;xi)
        let p = vec![0.3 * 0.9, 0.3 * 0.1, 0.0, 0.0, 0.0, 0.0, 0.7 * 0.2, 0.7 * 0.8];
        let j = DiscreteJoint::from_table(&["X", "S", "xi"], &[2, 2, 2], p).unwrap();
        let hx = j.entropy(&["X"]).unwrap();
        assert!((j.mutual_info(&["X"], &["S"]).unwrap() - hx).abs() < 1e-15);
        assert!(dpi_slack(&j).unwrap() > 0.0);
        // constant S: both sides vanish
        let p = vec![0.2 * 0.5, 0.2 * 0.5, 0.8 * 0.5, 0.8 * 0.5];
        let j = DiscreteJoint::from_table(&["X", "S", "xi"], &[2, 1, 2], p).unwrap();
        assert!(j.mutual_info(&["X"], &["S"]).unwrap().abs() < 1e-15);
        assert!(dpi_slack(&j).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sensor_gain_edge_cases() {
        // constant S forces I_old = I_new = 0, so slack = I_obs ≥ 0
        let mut p = Vec::new();
        let po = [[0.1, 0.3], [0.4, 0.2]];
        for row in po {
            for q in row {
                p.extend([q * 0.25, q * 0.75]);
            }
        }
        let j = DiscreteJoint::from_table(&["o1", "o2", "S", "xi"], &[2, 2, 1, 2], p).unwrap();
        assert!(j.mutual_info(&["xi"], &["S"]).unwrap().abs() < 1e-15);
        let obs = j.cond_mutual_info(&["o1"], &["o2"], &["xi"]).unwrap();
        assert!((sensor_gain_slack(&j).unwrap() - obs).abs() < 1e-15);

        // o2 = xi, o1 independent noise, S = (o1, o2): equality with I_obs = 0
        let mut p = vec![0.0; 2 * 2 * 4 * 2];
        for o1 in 0..2 {
            for o2 in 0..2 {
                let s = o1 * 2 + o2;
                let prob = [0.6, 0.4][o1] * [0.3, 0.7][o2];
                p[((o1 * 2 + o2) * 4 + s) * 2 + o2] = prob;
            }
        }
        let j = DiscreteJoint::from_table(&["o1", "o2", "S", "xi"], &[2, 2, 4, 2], p).unwrap();
        let h = j.entropy(&["xi"]).unwrap();
        assert!((j.mutual_info(&["xi"], &["S"]).unwrap() - h).abs() < 1e-14);
        assert!(j.mutual_info(&["xi"], &["o1"]).unwrap().abs() < 1e-14);
        assert!(j.cond_mutual_info(&["o1"], &["o2"], &["xi"]).unwrap().abs() < 1e-14);
        assert!(sensor_gain_slack(&j).unwrap().abs() < 1e-14);
    }

    #[test]
    fn reports_are_reproducible() {
        let a = verify_theorem2(10, 5).unwrap();
        let b = verify_theorem2(10, 5).unwrap();
        assert_eq!(a.min_slack.to_bits(), b.min_slack.to_bits());
        assert!(verify_lemma1_dpi(0, 0).is_err());
    }
}
