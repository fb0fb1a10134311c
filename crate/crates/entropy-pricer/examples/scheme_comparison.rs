//! Runs the three backward schemes on common random numbers and compares
//! them against the binomial benchmark at a desk scale (small path count;
//! the full reproduction lives behind `entropy-pricer table1`).
//!
//! Run with: cargo run --release --example scheme_comparison

use entropy_pricer::benchmark::{binomial_price, BinomialConfig};
use entropy_pricer::market::{simulate_paths, MarketConfig, PayoffSpec, TimeGrid};
use entropy_pricer::regression::BasisSpec;
use entropy_pricer::schemes::{classical_penalization, entropy_implicit, pia, SchemeConfig};

fn main() -> entropy_pricer::Result<()> {
    let market = MarketConfig {
        s0: vec![100.0, 100.0],
        rate: 0.05,
        dividend: 0.10,
        sigma: 0.2,
        horizon: 3.0,
    };
    let payoff = PayoffSpec::max_call(100.0)?;
    let grid = TimeGrid::new(50, market.horizon)?;
    let paths = simulate_paths(&market, &grid, 20_000, 7)?;
    let basis = BasisSpec::EuropeanControls {
        strike: payoff.strike,
        rate: market.rate,
        dividend: market.dividend,
        sigma: market.sigma,
    };

    let benchmark = binomial_price(&BinomialConfig {
        steps: 400,
        market: market.clone(),
        payoff,
    })?;
    println!("binomial benchmark: {benchmark:.4}\n");
    println!("      n   lambda   classical   implicit      pia");
    for &n in &[10.0, 100.0, 1000.0] {
        let classical =
            classical_penalization(&paths, &payoff, &SchemeConfig::classical(n, market.rate)?, &basis)?;
        let coupled = SchemeConfig::coupled(n, market.rate)?;
        let implicit = entropy_implicit(&paths, &payoff, &coupled, &basis)?;
        let improved = pia(&paths, &payoff, &coupled, &basis)?;
        println!(
            "  {n:>5}   {:>6}   {:>9.4}   {:>8.4}   {:>6.4}",
            coupled.params.lambda,
            classical.price,
            implicit.price,
            improved.price
        );
    }
    println!("\nthe entropy prices increase with n and approach the benchmark;");
    println!("classical penalization converges from its own direction with the");
    println!("usual regression bias visible at this path count");
    Ok(())
}
