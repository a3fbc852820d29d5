use super::params::{Gru, Head, Linear};
use crate::autodiff::{Graph, Result, Var};

pub(crate) fn linear(g: &mut Graph, p: &[Var], l: Linear, x: Var) -> Result<Var> {
    let y = g.matmul(x, p[l.w])?;
    g.add_row(y, p[l.b])
}

/// One GRU step on a batch: `h' = n + z ⊙ (h − n)` with
/// `n = tanh(x·Wₙ + bₓₙ + r ⊙ (h·Uₙ + bₕₙ))`.
pub(crate) fn gru(g: &mut Graph, p: &[Var], cell: Gru, x: Var, h: Var) -> Result<Var> {
    let k = cell.hidden;
    let gx = g.matmul(x, p[cell.wx])?;
    let gx = g.add_row(gx, p[cell.bx])?;
    let gh = g.matmul(h, p[cell.wh])?;
    let gh = g.add_row(gh, p[cell.bh])?;
    let xr = g.slice(gx, 1, 0, k)?;
    let xz = g.slice(gx, 1, k, k)?;
    let xn = g.slice(gx, 1, 2 * k, k)?;
    let hr = g.slice(gh, 1, 0, k)?;
    let hz = g.slice(gh, 1, k, k)?;
    let hn = g.slice(gh, 1, 2 * k, k)?;
    let r = g.add(xr, hr)?;
    let r = g.sigmoid(r)?;
    let z = g.add(xz, hz)?;
    let z = g.sigmoid(z)?;
    let rh = g.mul(r, hn)?;
    let n = g.add(xn, rh)?;
    let n = g.tanh(n)?;
    let diff = g.sub(h, n)?;
    let gated = g.mul(z, diff)?;
    g.add(n, gated)
}

/// Diagonal Gaussian parameters; the std is floored at `min_std` by construction.
pub(crate) fn gaussian_head(g: &mut Graph, p: &[Var], head: Head, h: Var, min_std: f64) -> Result<(Var, Var)> {
    let mu = linear(g, p, head.mu, h)?;
    let raw = linear(g, p, head.std, h)?;
    let std = softplus_std(g, raw, min_std)?;
    Ok((mu, std))
}

pub(crate) fn softplus_std(g: &mut Graph, raw: Var, min_std: f64) -> Result<Var> {
    let sp = g.softplus(raw)?;
    g.offset(sp, min_std)
}
