use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{DiscreteJoint, MAX_ALPHABET};
use crate::error::{invalid, Result};
use crate::rng::{stream, Purpose};

/// Shape of a chain `sources → S → xi`. With several sources their joint is
/// drawn as one distribution over the product alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub sources: Vec<(String, usize)>,
    pub latent: usize,
    pub target: usize,
}

impl ChainSpec {
    /// `X → S → xi`.
    pub fn single(x: usize, s: usize, xi: usize) -> Self {
        ChainSpec {
            sources: vec![("X".into(), x)],
            latent: s,
            target: xi,
        }
    }

    /// `(o1, o2) → S → xi`.
    pub fn two_sensors(o1: usize, o2: usize, s: usize, xi: usize) -> Self {
        ChainSpec {
            sources: vec![("o1".into(), o1), ("o2".into(), o2)],
            latent: s,
            target: xi,
        }
    }

    fn validate(&self) -> Result<()> {
        let cards = self.sources.iter().map(|s| s.1).chain([self.latent, self.target]);
        if self.sources.is_empty() || cards.clone().any(|c| c == 0 || c > MAX_ALPHABET) {
            return Err(invalid(format!("chain needs at least one source and alphabets in 1..={MAX_ALPHABET}")));
        }
        Ok(())
    }
}

/// A point drawn uniformly from the `n`-simplex.
pub(crate) fn uniform_simplex(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `p(sources) · p(S | sources) · p(xi | S)` with every distribution and
/// every conditional row drawn uniformly from its simplex. Variables are
/// named after the sources, then `S`, then `xi`.
pub fn sample_markov_chain(spec: &ChainSpec, seed: u64) -> Result<DiscreteJoint> {
    sample_with(spec, &mut stream(seed, 0, Purpose::Theory))
}

pub(crate) fn sample_with(spec: &ChainSpec, rng: &mut ChaCha20Rng) -> Result<DiscreteJoint> {
    spec.validate()?;
    let nx: usize = spec.sources.iter().map(|s| s.1).product();
    let (ns, nxi) = (spec.latent, spec.target);
    let px = uniform_simplex(rng, nx);
    let ps_x: Vec<Vec<f64>> = (0..nx).map(|_| uniform_simplex(rng, ns)).collect();
    let pxi_s: Vec<Vec<f64>> = (0..ns).map(|_| uniform_simplex(rng, nxi)).collect();
    let mut probs = Vec::with_capacity(nx * ns * nxi);
    for x in 0..nx {
        for s in 0..ns {
            for xi in 0..nxi {
                probs.push(px[x] * ps_x[x][s] * pxi_s[s][xi]);
            }
        }
    }
    let mut names: Vec<String> = spec.sources.iter().map(|s| s.0.clone()).collect();
    names.extend(["S".to_string(), "xi".to_string()]);
    let mut cards: Vec<usize> = spec.sources.iter().map(|s| s.1).collect();
    cards.extend([ns, nxi]);
    DiscreteJoint::new(names, cards, probs)
}
