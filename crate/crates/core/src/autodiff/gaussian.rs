//! Differentiable diagonal-Gaussian helpers: reparameterized sampling and KL divergence.

use super::graph::{Graph, Var};
use super::tensor::{Result, Tensor, TensorError};

fn check_positive(op: &'static str, t: &Tensor) -> Result<()> {
    match t.data().iter().find(|&&s| s <= 0.0) {
        Some(&value) => Err(TensorError::NonPositiveStd { op, value }),
        None => Ok(()),
    }
}

fn check_same(op: &'static str, g: &Graph, vars: &[Var]) -> Result<()> {
    let first = g.shape(vars[0]);
    for &v in &vars[1..] {
        if g.shape(v) != first {
            return Err(TensorError::ShapeMismatch {
                op,
                left: first.to_vec(),
                right: g.shape(v).to_vec(),
            });
        }
    }
    Ok(())
}

/// `mu + std ⊙ noise`, differentiable in `mu` and `std`. `noise` holds
/// externally drawn standard-normal values.
pub fn gaussian_sample(g: &mut Graph, mu: Var, std: Var, noise: &Tensor) -> Result<Var> {
    check_same("gaussian_sample", g, &[mu, std])?;
    if g.shape(mu) != noise.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "gaussian_sample",
            left: g.shape(mu).to_vec(),
            right: noise.shape().to_vec(),
        });
    }
    check_positive("gaussian_sample", g.value(std))?;
    let eps = g.constant(noise.clone());
    let scaled = g.mul(std, eps)?;
    g.add(mu, scaled)
}

/// Elementwise `KL(N(mu_p, std_p²) ‖ N(mu_q, std_q²))` terms.
fn kl_terms(g: &mut Graph, mu_p: Var, std_p: Var, mu_q: Var, std_q: Var) -> Result<Var> {
    check_same("kl_diag_gauss", g, &[mu_p, std_p, mu_q, std_q])?;
    check_positive("kl_diag_gauss", g.value(std_p))?;
    check_positive("kl_diag_gauss", g.value(std_q))?;
    let log_q = g.log(std_q)?;
    let log_p = g.log(std_p)?;
    let log_ratio = g.sub(log_q, log_p)?;
    let var_p = g.square(std_p)?;
    let diff = g.sub(mu_p, mu_q)?;
    let diff_sq = g.square(diff)?;
    let numerator = g.add(var_p, diff_sq)?;
    let var_q = g.square(std_q)?;
    let denominator = g.scale(var_q, 2.0)?;
    let quad = g.div(numerator, denominator)?;
    let total = g.add(log_ratio, quad)?;
    g.offset(total, -0.5)
}

/// KL divergence between two diagonal Gaussians, summed over every entry.
pub fn kl_diag_gauss(g: &mut Graph, mu_p: Var, std_p: Var, mu_q: Var, std_q: Var) -> Result<Var> {
    let terms = kl_terms(g, mu_p, std_p, mu_q, std_q)?;
    g.sum(terms, None)
}

/// Row-wise KL for `[batch, d]` inputs; returns a `[batch]` vector.
pub fn kl_diag_gauss_rows(
    g: &mut Graph,
    mu_p: Var,
    std_p: Var,
    mu_q: Var,
    std_q: Var,
) -> Result<Var> {
    let terms = kl_terms(g, mu_p, std_p, mu_q, std_q)?;
    let last = g.shape(terms).len().saturating_sub(1);
    g.sum(terms, Some(last))
}

/// Plain-number KL for diagonal Gaussians given as slices.
pub fn kl_diag_gauss_value(mu_p: &[f64], std_p: &[f64], mu_q: &[f64], std_q: &[f64]) -> f64 {
    mu_p.iter()
        .zip(std_p)
        .zip(mu_q.iter().zip(std_q))
        .map(|((&mp, &sp), (&mq, &sq))| {
            (sq / sp).ln() + (sp * sp + (mp - mq) * (mp - mq)) / (2.0 * sq * sq) - 0.5
        })
        .sum()
}
