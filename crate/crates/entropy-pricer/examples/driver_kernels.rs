//! Evaluates the generator kernels at a few points: the smoothed-plus
//! function, its CDF companion, the truncated family and its root, and the
//! Gibbs policy.
//!
//! Run with: cargo run --example driver_kernels

use entropy_pricer::drivers::{
    gibbs_density, gibbs_mean, phi, phi_lambda_inf, phi_lambda_n, phi_n, phi_n_root, psi,
    DriverParams,
};

fn main() -> entropy_pricer::Result<()> {
    println!("phi(x) = ln((e^x - 1)/x), continuous at 0:");
    for x in [-100.0, -1.0, 0.0, 1.0, 100.0, 1e6] {
        println!("  phi({x:>9.1e}) = {:+.6}", phi(x)?);
    }

    println!("\npsi(x) = phi(x)/x is a CDF:");
    for x in [-50.0, -5.0, 0.0, 5.0, 50.0] {
        println!("  psi({x:>5.1}) = {:.6}", psi(x)?);
    }

    println!("\nphi_n and its root (phi_n(root) = 0, root in (-1, 0]):");
    for n in [1.0, 2.0, 10.0, 100.0, 1000.0] {
        let root = phi_n_root(n)?;
        println!(
            "  n = {n:6}: phi_n(0) = ln n = {:.4}, root = {root:+.9}, residual {:+.1e}",
            phi_n(0.0, n)?,
            phi_n(root, n)?
        );
    }

    let params = DriverParams::new(0.1, 100.0, 0.0)?;
    println!("\ngenerator phi_lambda_n(p, x) around the payoff level p = 1:");
    for x in [0.5, 1.0, 1.0 - 0.1 * phi_n_root(100.0)?, 1.5, 3.0] {
        println!("  x = {x:.4}: {:+.6}", phi_lambda_n(1.0, x, &params)?);
    }
    println!("singular limit phi_lambda_inf(1, x, 0.1):");
    for x in [1.0, 1.05, 1.1, 2.0] {
        println!("  x = {x:.2}: {}", phi_lambda_inf(1.0, x, 0.1));
    }

    println!("\nGibbs policy on [0, n], n = 5:");
    for alpha in [-2.0, 0.0, 2.0] {
        let mean = gibbs_mean(alpha, 5.0);
        println!(
            "  alpha = {alpha:+.1}: density(0) = {:.4}, density(5) = {:.4}, mean = {mean:.4}",
            gibbs_density(alpha, 5.0, 0.0)?,
            gibbs_density(alpha, 5.0, 5.0)?
        );
    }
    Ok(())
}
