use entropy_pricer::market::{simulate_paths, MarketConfig, PayoffSpec, TimeGrid};
use entropy_pricer::regression::BasisSpec;
use entropy_pricer::schemes::{entropy_implicit, pia_run, SchemeConfig};

fn main() {
    let payoff = PayoffSpec::max_call(100.0).unwrap();
    let grid = TimeGrid::new(100, 3.0).unwrap();
    for &(s0, n) in &[(110.0, 1000.0), (100.0, 1000.0), (90.0, 1000.0), (100.0, 100.0)] {
        let market = MarketConfig { s0: vec![s0, s0], rate: 0.05, dividend: 0.10, sigma: 0.2, horizon: 3.0 };
        let basis = BasisSpec::EuropeanControls { strike: 100.0, rate: 0.05, dividend: 0.10, sigma: 0.2 };
        let paths = simulate_paths(&market, &grid, 100_000, 7).unwrap();
        let cfg = SchemeConfig::coupled(n, 0.05).unwrap();
        let e = entropy_implicit(&paths, &payoff, &cfg, &basis).unwrap();
        let p = pia_run(&paths, &payoff, &cfg, &basis).unwrap();
        let worst_dip = p.iteration_prices.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        println!("(s0={s0}, n={n}): implicit {:.4}  pia {:.4}  (impl-pia = {:+.4}, worst dip {:+.4})", e.price, p.surface.price, e.price - p.surface.price, worst_dip);
        println!("  traj: {:?}", p.iteration_prices.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>());
    }
}
