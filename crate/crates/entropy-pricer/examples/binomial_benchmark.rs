//! Prices the American max-call on a product binomial tree and shows the
//! convergence under step doubling together with the European counterpart.
//!
//! Run with: cargo run --example binomial_benchmark

use entropy_pricer::benchmark::{binomial_european_price, binomial_price, BinomialConfig};
use entropy_pricer::market::{MarketConfig, PayoffSpec};

fn main() -> entropy_pricer::Result<()> {
    let payoff = PayoffSpec::max_call(100.0)?;
    println!("two-asset American max-call, K = 100, r = 5%, d = 10%, sigma = 20%, T = 3\n");
    println!("   s0    steps   american   european   premium");
    for &s0 in &[90.0, 100.0, 110.0] {
        let market = MarketConfig {
            s0: vec![s0, s0],
            rate: 0.05,
            dividend: 0.10,
            sigma: 0.2,
            horizon: 3.0,
        };
        for &steps in &[100usize, 400] {
            let cfg = BinomialConfig { steps, market: market.clone(), payoff };
            let american = binomial_price(&cfg)?;
            let european = binomial_european_price(&cfg)?;
            println!(
                "  {s0:>5}  {steps:>5}   {american:>8.4}   {european:>8.4}   {:>7.4}",
                american - european
            );
        }
    }
    Ok(())
}
