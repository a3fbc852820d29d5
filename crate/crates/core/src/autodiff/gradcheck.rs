use super::graph::{Graph, Var};
use super::tensor::{Tensor, TensorError};

/// Outcome of comparing analytic gradients with central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    /// (analytic, numeric) gradient at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
    pub coordinates: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

/// `|a − b| / max(1e-8, |a| + |b|)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

fn evaluate<F, E>(f: &F, params: &[Tensor]) -> Result<f64, E>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    let value = g.value(out);
    if !value.is_scalar() {
        return Err(TensorError::NonScalarOutput(value.shape().to_vec()).into());
    }
    Ok(value.data()[0])
}

/// Checks every coordinate of every parameter against a central difference
/// with step `eps`.
///
/// `f` must build a scalar from the supplied parameter leaves and must be a
/// pure function of them; two identical calls that disagree are rejected.
pub fn grad_check<F, E>(f: F, params: &[Tensor], eps: f64, tol: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    let first = g.value(out).item().unwrap_or(f64::NAN);
    let second = evaluate(&f, params)?;
    if first.to_bits() != second.to_bits() {
        return Err(TensorError::NonDeterministic { first, second }.into());
    }
    let grads = g.backward(out)?;

    let mut work: Vec<Tensor> = params.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    let mut worst_values = None;
    let mut coordinates = 0;
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for ci in 0..work[pi].len() {
            let original = work[pi].data()[ci];
            work[pi].data_mut()[ci] = original + eps;
            let plus = evaluate(&f, &work)?;
            work[pi].data_mut()[ci] = original - eps;
            let minus = evaluate(&f, &work)?;
            work[pi].data_mut()[ci] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic.data()[ci], numeric);
            coordinates += 1;
            if worst.is_none() || err > max_rel_error {
                max_rel_error = err;
                worst = Some((pi, ci));
                worst_values = Some((analytic.data()[ci], numeric));
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        worst_values,
        coordinates,
        tol,
    })
}
