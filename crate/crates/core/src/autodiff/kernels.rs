//! Dense matrix kernels shared by the forward and backward passes.

/// `out += a[m×k] · b[k×n]`
pub(crate) fn matmul_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out += g[m×n] · bᵀ` where `b` is `k×n`; `out` is `m×k`.
pub(crate) fn matmul_nt_acc(out: &mut [f64], g: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for (&x, &y) in g_row.iter().zip(b_row) {
                acc += x * y;
            }
            *o += acc;
        }
    }
}

/// `out += aᵀ · g` where `a` is `m×k` and `g` is `m×n`; `out` is `k×n`.
pub(crate) fn matmul_tn_acc(out: &mut [f64], a: &[f64], g: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let g_row = &g[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in out_row.iter_mut().zip(g_row) {
                *o += av * gv;
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
