//! Exact checks of the information inequalities on random discrete Markov
//! chains, plus the closed-form bounds and the linear-Gaussian channel.
//!
//! cargo run --release --example verify_theory

use nalgebra::DMatrix;

use ib_odometry::info::{
    bound_value_corollary2, gaussian_channel_mi_monte_carlo, linear_gaussian_bottleneck_mi, sample_markov_chain,
    verify_lemma1_dpi, verify_theorem2, BoundContext, ChainSpec,
};

fn main() -> ib_odometry::Result<()> {
    let chain = sample_markov_chain(&ChainSpec::single(3, 2, 3), 1)?;
    println!(
        "one chain X -> S -> xi: I(X;S) = {:.4}, I(X;xi) = {:.4}, I(X;xi|S) = {:.1e} nats",
        chain.mutual_info(&["X"], &["S"])?,
        chain.mutual_info(&["X"], &["xi"])?,
        chain.cond_mutual_info(&["X"], &["xi"], &["S"])?
    );

    for report in [verify_lemma1_dpi(1000, 0)?, verify_theorem2(1000, 0)?] {
        println!(
            "{:<48} trials {} violations {} min slack {:.3e} ({:.2} s)",
            report.claim, report.trials, report.violations, report.min_slack, report.runtime_seconds
        );
    }

    let ctx = BoundContext {
        layers: 1.0,
        eta: 0.5,
        sigma: 1.0,
        n: 1000.0,
        d: 4.0,
        m: 1.0,
        s_card: 16.0,
    };
    println!("latent-dimension bound at n = 1000:");
    for d in [2.0, 4.0, 8.0, 16.0, 32.0] {
        println!("  d = {d:>4}: {:.5}", bound_value_corollary2(&BoundContext { d, ..ctx.clone() })?);
    }

    let one = DMatrix::from_element(1, 1, 1.0);
    let exact = linear_gaussian_bottleneck_mi(&one, &one, &one)?;
    let mc = gaussian_channel_mi_monte_carlo(&one, &one, &one, 1_000_000, 0)?;
    println!(
        "scalar channel: closed form {exact:.6}, Monte Carlo {:.6} ± {:.6}",
        mc.mean, mc.std_error
    );
    Ok(())
}
