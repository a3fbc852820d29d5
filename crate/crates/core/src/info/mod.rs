//! Exact information measures on small discrete joints, Markov-chain
//! sampling, checks of the bottleneck inequalities, and the closed-form
//! generalization bounds.
//!
//! All quantities are in nats.

mod bounds;
mod chain;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use bounds::{
    bound_value_corollary1, bound_value_corollary2, bound_value_theorem1, gaussian_channel_mi_monte_carlo,
    linear_gaussian_bottleneck_mi, BoundContext, MonteCarloEstimate,
};
pub use chain::{sample_markov_chain, ChainSpec};
pub use verify::{verify_lemma1_dpi, verify_theorem2, Violation, VerifyReport};

pub const MAX_ALPHABET: usize = 8;

/// Probability table over the product of named finite alphabets. The last
/// variable varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    names: Vec<String>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(names: Vec<String>, cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if names.len() != cards.len() || names.is_empty() {
            return Err(invalid("one alphabet size per variable, at least one variable"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(invalid(format!("variable `{n}` appears twice")));
            }
        }
        if cards.iter().any(|&c| c == 0 || c > MAX_ALPHABET) {
            return Err(invalid(format!("alphabet sizes must lie in 1..={MAX_ALPHABET}")));
        }
        if probs.len() != cards.iter().product::<usize>() {
            return Err(invalid("table size does not match the alphabets"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteJoint { names, cards, probs })
    }

    /// Convenience constructor from `&str` names.
    pub fn from_table(names: &[&str], cards: &[usize], probs: Vec<f64>) -> Result<Self> {
        Self::new(names.iter().map(|s| s.to_string()).collect(), cards.to_vec(), probs)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown variable `{name}`")))
    }

    fn indices(&self, vars: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(vars.len());
        for v in vars {
            let i = self.index_of(v)?;
            if !out.contains(&i) {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Marginal table over `vars` in the given order, last fastest.
    pub fn marginal(&self, vars: &[&str]) -> Result<Vec<f64>> {
        let idx = self.indices(vars)?;
        Ok(self.marginal_idx(&idx))
    }

    fn marginal_idx(&self, idx: &[usize]) -> Vec<f64> {
        let size: usize = idx.iter().map(|&i| self.cards[i]).product();
        let mut out = vec![0.0; size];
        let mut digits = vec![0usize; self.cards.len()];
        for &p in &self.probs {
            let mut k = 0;
            for &i in idx {
                k = k * self.cards[i] + digits[i];
            }
            out[k] += p;
            for j in (0..digits.len()).rev() {
                digits[j] += 1;
                if digits[j] < self.cards[j] {
                    break;
                }
                digits[j] = 0;
            }
        }
        out
    }

    /// Joint entropy of `vars`; the empty set has entropy 0.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        let idx = self.indices(vars)?;
        Ok(entropy_of(&self.marginal_idx(&idx)))
    }

    /// `I(A; B)`.
    pub fn mutual_info(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        self.cond_mutual_info(a, b, &[])
    }

    /// `I(A; B | C) = H(A,C) + H(B,C) − H(A,B,C) − H(C)`.
    pub fn cond_mutual_info(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        let bc: Vec<&str> = b.iter().chain(c).copied().collect();
        let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(c)?)
    }
}

/// Shannon entropy with `0 · ln 0 = 0`.
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum::<f64>()
}

/// Free-function forms of the joint's measures.
pub fn entropy(joint: &DiscreteJoint, vars: &[&str]) -> Result<f64> {
    joint.entropy(vars)
}

pub fn mutual_info(joint: &DiscreteJoint, a: &[&str], b: &[&str]) -> Result<f64> {
    joint.mutual_info(a, b)
}

pub fn cond_mutual_info(joint: &DiscreteJoint, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    joint.cond_mutual_info(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn pair(p: [f64; 4]) -> DiscreteJoint {
        DiscreteJoint::from_table(&["a", "b"], &[2, 2], p.to_vec()).unwrap()
    }

    #[test]
    fn binary_examples() {
        assert!(pair([0.25; 4]).mutual_info(&["a"], &["b"]).unwrap().abs() < 1e-15);
        assert!((pair([0.5, 0.0, 0.0, 0.5]).mutual_info(&["a"], &["b"]).unwrap() - LN_2).abs() < 1e-15);
        // direct summation of p ln(p / (pa pb)) with exact marginals 0.5
        let table: [f64; 4] = [0.4, 0.1, 0.1, 0.4];
        let oracle: f64 = table.iter().map(|&p| p * (p / 0.25).ln()).sum();
        let mi = pair(table).mutual_info(&["a"], &["b"]).unwrap();
        assert!((mi - oracle).abs() < 1e-14);
        assert!((mi - 0.1927).abs() < 5e-5, "{mi}");
    }

    #[test]
    fn marginal_order_follows_arguments() {
        let j = DiscreteJoint::from_table(&["x", "y"], &[2, 3], vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.2]).unwrap();
        let m = j.marginal(&["y", "x"]).unwrap();
        assert_eq!(m.len(), 6);
        assert!((m[1] - 0.05).abs() < 1e-15 && (m[2] - 0.2).abs() < 1e-15);
        let y = j.marginal(&["y"]).unwrap();
        assert!((y[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DiscreteJoint::from_table(&["a"], &[2], vec![0.5, 0.6]).is_err());
        assert!(DiscreteJoint::from_table(&["a"], &[9], vec![1.0 / 9.0; 9]).is_err());
        assert!(DiscreteJoint::from_table(&["a", "a"], &[1, 1], vec![1.0]).is_err());
        assert!(DiscreteJoint::from_table(&["a"], &[2], vec![1.5, -0.5]).is_err());
        assert!(pair([0.25; 4]).entropy(&["c"]).is_err());
    }

    fn random_joint() -> impl Strategy<Value = DiscreteJoint> {
        (prop::collection::vec(1usize..=3, 3)).prop_flat_map(|cards| {
            let n: usize = cards.iter().product();
            prop::collection::vec(0.0f64..1.0, n).prop_map(move |w| {
                let total: f64 = w.iter().sum::<f64>() + 1e-9;
                let mut p: Vec<f64> = w.iter().map(|x| (x + 1e-9 / n as f64) / total).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= s);
                DiscreteJoint::from_table(&["xi", "o1", "o2"], &cards, p).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn symmetry_chain_rule_and_sign(j in random_joint()) {
            let ab = j.mutual_info(&["xi"], &["o1"]).unwrap();
            let ba = j.mutual_info(&["o1"], &["xi"]).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let whole = j.mutual_info(&["xi"], &["o1", "o2"]).unwrap();
            let parts = ab + j.cond_mutual_info(&["xi"], &["o2"], &["o1"]).unwrap();
            prop_assert!((whole - parts).abs() < 1e-10);
            for v in [&["xi"][..], &["o1", "o2"], &["xi", "o1", "o2"]] {
                prop_assert!(j.entropy(v).unwrap() >= -1e-12);
            }
            prop_assert!(j.cond_mutual_info(&["o1"], &["o2"], &["xi"]).unwrap() >= -1e-12);
        }
    }
}
