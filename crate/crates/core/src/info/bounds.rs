use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{normals, stream, Purpose};

/// Assumption-supplied constants of the generalization bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundContext {
    /// Effective number of layers that lose information.
    pub layers: f64,
    /// Per-layer contraction constant, in (0, 1).
    pub eta: f64,
    /// Sub-Gaussian parameter of the loss.
    pub sigma: f64,
    /// Sample size.
    pub n: f64,
    /// Latent dimensionality.
    pub d: f64,
    /// Bound on every latent coordinate.
    pub m: f64,
    /// Cardinality of the latent space.
    pub s_card: f64,
}

impl BoundContext {
    pub fn validate(&self) -> Result<()> {
        let all = [self.layers, self.eta, self.sigma, self.n, self.d, self.m, self.s_card];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("bound constants must be finite and positive"));
        }
        if self.eta >= 1.0 {
            return Err(invalid("eta must be smaller than 1"));
        }
        Ok(())
    }

    /// `exp(−(L/2) ln(1/η))`.
    pub fn prefactor(&self) -> f64 {
        (-(self.layers / 2.0) * (1.0 / self.eta).ln()).exp()
    }
}

/// `prefactor · √(2σ² I(X;S) / n)`.
pub fn bound_value_theorem1(ctx: &BoundContext, i_xs: f64) -> Result<f64> {
    ctx.validate()?;
    if !(i_xs >= 0.0 && i_xs.is_finite()) {
        return Err(invalid("I(X;S) must be finite and non-negative"));
    }
    Ok(ctx.prefactor() * (2.0 * ctx.sigma.powi(2) * i_xs / ctx.n).sqrt())
}

/// `prefactor · √(2σ² ln|S| / n)`.
pub fn bound_value_corollary1(ctx: &BoundContext) -> Result<f64> {
    ctx.validate()?;
    Ok(ctx.prefactor() * (2.0 * ctx.sigma.powi(2) * ctx.s_card.ln() / ctx.n).sqrt())
}

/// `prefactor · σ · √(d ln d / n + 2 ln(2M) d / n + d / (n / ln n))`.
pub fn bound_value_corollary2(ctx: &BoundContext) -> Result<f64> {
    ctx.validate()?;
    let (d, n) = (ctx.d, ctx.n);
    let c = d * d.ln() / n + 2.0 * (2.0 * ctx.m).ln() * d / n + d / (n / n.ln());
    if c < 0.0 {
        return Err(invalid("the complexity term is negative for these constants"));
    }
    Ok(ctx.prefactor() * ctx.sigma * c.sqrt())
}

fn check_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(invalid(format!("{name} must be {n}×{n}")));
    }
    Ok(())
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(invalid(format!("{name} must be symmetric")));
    }
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min < -1e-12 * scale {
        return Err(invalid(format!("{name} must be positive semidefinite (eigenvalue {min})")));
    }
    Ok(())
}

fn log_det_pd(name: &str, m: DMatrix<f64>) -> Result<(f64, Cholesky<f64, Dyn>)> {
    let chol = Cholesky::new(m).ok_or_else(|| invalid(format!("{name} is singular")))?;
    let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((ld, chol))
}

fn validated(a: &DMatrix<f64>, sigma: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square("Sigma_prev", sigma, a.ncols())?;
    check_square("R", r, a.nrows())?;
    check_psd("Sigma_prev", sigma)?;
    check_psd("R", r)?;
    Ok(a * sigma * a.transpose())
}

/// `½ ln(|AΣA' + R| / |AΣA'|)`: information the additive noise `R` injects
/// into the prior state of a linear-Gaussian transition.
pub fn linear_gaussian_bottleneck_mi(a: &DMatrix<f64>, sigma: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let prop = validated(a, sigma, r)?;
    let (ld0, _) = log_det_pd("A Sigma A'", prop.clone())?;
    let (ld1, _) = log_det_pd("A Sigma A' + R", prop + r)?;
    Ok(0.5 * (ld1 - ld0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MonteCarloEstimate {
            mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let roots = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&roots) * e.eigenvectors.transpose()
}

fn half_quad(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    0.5 * v.dot(&chol.solve(v))
}

/// Sample average of `ln p(y | w) − ln p(y)` for `y = A x + w`,
/// `x ~ N(0, Σ)`, `w ~ N(0, R)`: a direct estimate of `I(w; y)`.
pub fn gaussian_channel_mi_monte_carlo(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    r: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let prop = validated(a, sigma, r)?;
    let (ld0, given_w) = log_det_pd("A Sigma A'", prop.clone())?;
    let (ld1, marginal) = log_det_pd("A Sigma A' + R", prop + r)?;
    let (sx, sw) = (sqrt_psd(sigma), sqrt_psd(r));
    let mut rng = stream(seed, 0, Purpose::Theory);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let x = &sx * DVector::from_vec(normals(&mut rng, a.ncols()));
            let w = &sw * DVector::from_vec(normals(&mut rng, a.nrows()));
            let y = a * x + &w;
            let ln_cond = -0.5 * ld0 - half_quad(&given_w, &(&y - &w));
            let ln_marg = -0.5 * ld1 - half_quad(&marginal, &y);
            ln_cond - ln_marg
        })
        .collect();
    Ok(MonteCarloEstimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(layers: f64, d: f64, n: f64) -> BoundContext {
        BoundContext {
            layers,
            eta: 0.5,
            sigma: 1.0,
            n,
            d,
            m: 1.0,
            s_card: 16.0,
        }
    }

    #[test]
    fn corollary2_reference_point() {
        // term by term: 4 ln 4 / 1000, 2 ln 2 · 4 / 1000, 4 ln 1000 / 1000
        let c = (4.0 * 4f64.ln() / 1000.0 + 8.0 * 2f64.ln() / 1000.0 + 4.0 * 1000f64.ln() / 1000.0).sqrt();
        let oracle = c / 2f64.sqrt();
        let v = bound_value_corollary2(&ctx(1.0, 4.0, 1000.0)).unwrap();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.1392).abs() < 1e-3, "{v}");
    }

    #[test]
    fn theorem1_and_corollary1() {
        let c = ctx(1.0, 4.0, 1000.0);
        assert_eq!(bound_value_theorem1(&c, 0.0).unwrap(), 0.0);
        assert!(bound_value_theorem1(&c, -1.0).is_err());
        let via_card = bound_value_theorem1(&c, 16f64.ln()).unwrap();
        assert!((bound_value_corollary1(&c).unwrap() - via_card).abs() < 1e-15);
        let vals: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&l| bound_value_theorem1(&ctx(l, 4.0, 1000.0), 1.0).unwrap())
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] < 1e-14);
        let mut bad = c.clone();
        bad.eta = 1.0;
        assert!(bound_value_corollary2(&bad).is_err());
    }

    #[test]
    fn corollary2_grows_in_d_and_shrinks_in_n() {
        for n in [100.0, 1000.0, 10_000.0] {
            let mut prev = 0.0;
            for d in 1..=64 {
                let v = bound_value_corollary2(&ctx(2.0, d as f64, n)).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
        for d in [2.0, 8.0, 32.0] {
            let mut prev = f64::INFINITY;
            for n in [50.0, 100.0, 1000.0, 1e4, 1e5] {
                let v = bound_value_corollary2(&ctx(2.0, d, n)).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_channel() {
        let v = linear_gaussian_bottleneck_mi(&m1(1.0), &m1(1.0), &m1(1.0)).unwrap();
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(linear_gaussian_bottleneck_mi(&m1(2.0), &m1(3.0), &m1(0.0)).unwrap(), 0.0);
        assert!(linear_gaussian_bottleneck_mi(&m1(0.0), &m1(1.0), &m1(1.0)).is_err());
        assert!(linear_gaussian_bottleneck_mi(&m1(1.0), &m1(-1.0), &m1(1.0)).is_err());
    }

    #[test]
    fn monte_carlo_agrees_in_two_dimensions() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 0.8]);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let r = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.2]);
        let exact = linear_gaussian_bottleneck_mi(&a, &s, &r).unwrap();
        let est = gaussian_channel_mi_monte_carlo(&a, &s, &r, 100_000, 4).unwrap();
        assert!(est.agrees_with(exact, 4.0), "{exact} vs {est:?}");
    }

    fn psd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let b = DMatrix::from_vec(n, n, v);
            &b * b.transpose() + DMatrix::identity(n, n) * 0.05
        })
    }

    proptest! {
        #[test]
        fn larger_noise_means_more_information(s in psd(3), r in psd(3), c in 1.01f64..5.0) {
            let a = DMatrix::identity(3, 3);
            let lo = linear_gaussian_bottleneck_mi(&a, &s, &r).unwrap();
            let hi = linear_gaussian_bottleneck_mi(&a, &s, &(r * c)).unwrap();
            prop_assert!(hi > lo && lo > 0.0);
        }
    }
}
