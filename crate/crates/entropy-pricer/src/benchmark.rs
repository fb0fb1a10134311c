//! Binomial-tree reference prices for the American max-call.
//!
//! One asset uses the standard two-branch tree with up factor `e^{σ√Δt}`;
//! two assets use a four-branch product tree over independent per-asset
//! moves. Exercise is allowed at every node and discounting is `e^{-rΔt}`
//! per step.

use crate::error::{Error, Result};
use crate::market::{payoff, MarketConfig, PayoffSpec};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BinomialConfig {
    /// Tree steps; convergence is certified by doubling (see tests) rather
    /// than by a closed-form rate.
    pub steps: usize,
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
}

impl BinomialConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if self.steps == 0 {
            return Err(Error::Config("binomial tree needs at least one step".into()));
        }
        if self.market.dim() > 2 {
            return Err(Error::UnsupportedDimension(self.market.dim()));
        }
        Ok(())
    }
}

/// American price by backward induction on the (product) tree.
pub fn binomial_price(cfg: &BinomialConfig) -> Result<f64> {
    tree_price(cfg, true)
}

/// European price on the same tree, for reference and for the
/// exercise-premium sanity checks.
pub fn binomial_european_price(cfg: &BinomialConfig) -> Result<f64> {
    tree_price(cfg, false)
}

struct TreeStep {
    up_prob: f64,
    discount: f64,
    sqrt_dt_vol: f64,
}

fn tree_setup(cfg: &BinomialConfig) -> TreeStep {
    let dt = cfg.market.horizon / cfg.steps as f64;
    let sqrt_dt_vol = cfg.market.sigma * dt.sqrt();
    let up = sqrt_dt_vol.exp();
    let down = 1.0 / up;
    let growth = ((cfg.market.rate - cfg.market.dividend) * dt).exp();
    // Moment matching per asset; degenerate volatilities get clamped so the
    // tree stays a probability tree (the drift then shows up as exercise
    // timing rather than lattice drift).
    let mut up_prob = (growth - down) / (up - down);
    if !up_prob.is_finite() {
        up_prob = 0.5;
    }
    up_prob = up_prob.clamp(0.0, 1.0);
    TreeStep { up_prob, discount: (-cfg.market.rate * dt).exp(), sqrt_dt_vol }
}

fn tree_price(cfg: &BinomialConfig, american: bool) -> Result<f64> {
    cfg.validate()?;
    match cfg.market.dim() {
        1 => Ok(tree_price_1d(cfg, american)),
        2 => Ok(tree_price_2d(cfg, american)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Price ladder at tree level `k`: `e^{σ√Δt (2j − k)}` for `j = 0..=k`.
fn level_ladder(sqrt_dt_vol: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|j| (sqrt_dt_vol * (2.0 * j as f64 - k as f64)).exp()).collect()
}

fn tree_price_1d(cfg: &BinomialConfig, american: bool) -> f64 {
    let step = tree_setup(cfg);
    let s0 = cfg.market.s0[0];
    let steps = cfg.steps;
    let (p, q) = (step.up_prob, 1.0 - step.up_prob);

    let ladder = level_ladder(step.sqrt_dt_vol, steps);
    let mut values: Vec<f64> = ladder.iter().map(|l| payoff(&cfg.payoff, &[s0 * l])).collect();

    for k in (0..steps).rev() {
        let ladder = level_ladder(step.sqrt_dt_vol, k);
        for j in 0..=k {
            let cont = step.discount * (p * values[j + 1] + q * values[j]);
            values[j] = if american {
                cont.max(payoff(&cfg.payoff, &[s0 * ladder[j]]))
            } else {
                cont
            };
        }
    }
    values[0]
}

fn tree_price_2d(cfg: &BinomialConfig, american: bool) -> f64 {
    let step = tree_setup(cfg);
    let (a0, b0) = (cfg.market.s0[0], cfg.market.s0[1]);
    let steps = cfg.steps;
    let (p, q) = (step.up_prob, 1.0 - step.up_prob);
    let (pp, pq, qq) = (p * p, p * q, q * q);
    let stride = steps + 1;

    let ladder = level_ladder(step.sqrt_dt_vol, steps);
    let mut values = vec![0.0f64; stride * stride];
    for j1 in 0..=steps {
        for j2 in 0..=steps {
            values[j1 * stride + j2] = payoff(&cfg.payoff, &[a0 * ladder[j1], b0 * ladder[j2]]);
        }
    }

    for k in (0..steps).rev() {
        let ladder = level_ladder(step.sqrt_dt_vol, k);
        // The stencil only reads indices at or above the write position, so
        // the sweep can update in place.
        for j1 in 0..=k {
            for j2 in 0..=k {
                let up_up = values[(j1 + 1) * stride + j2 + 1];
                let up_down = values[(j1 + 1) * stride + j2];
                let down_up = values[j1 * stride + j2 + 1];
                let down_down = values[j1 * stride + j2];
                let cont = step.discount
                    * (pp * up_up + pq * (up_down + down_up) + qq * down_down);
                values[j1 * stride + j2] = if american {
                    cont.max(payoff(&cfg.payoff, &[a0 * ladder[j1], b0 * ladder[j2]]))
                } else {
                    cont
                };
            }
        }
    }
    values[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_config(s0: f64, steps: usize) -> BinomialConfig {
        BinomialConfig {
            steps,
            market: MarketConfig {
                s0: vec![s0, s0],
                rate: 0.05,
                dividend: 0.10,
                sigma: 0.2,
                horizon: 3.0,
            },
            payoff: PayoffSpec::max_call(100.0).unwrap(),
        }
    }

    #[test]
    fn reference_prices_for_the_benchmark_grid() {
        for &(s0, expected) in &[(90.0, 8.296), (100.0, 14.211), (110.0, 21.799)] {
            let price = binomial_price(&table_config(s0, 400)).unwrap();
            assert!(
                (price - expected).abs() <= 0.02,
                "binomial at s0 = {s0}: {price} vs {expected}"
            );
        }
    }

    #[test]
    fn doubling_the_steps_is_stable() {
        let p400 = binomial_price(&table_config(100.0, 400)).unwrap();
        let p800 = binomial_price(&table_config(100.0, 800)).unwrap();
        assert!((p400 - p800).abs() <= 0.02, "|{p400} - {p800}| > 0.02");
    }

    #[test]
    fn american_dominates_european() {
        let cfg = table_config(100.0, 200);
        let american = binomial_price(&cfg).unwrap();
        let european = binomial_european_price(&cfg).unwrap();
        assert!(american >= european - 1e-12, "american {american} < european {european}");
        // With a dividend yield the early-exercise premium is strictly positive.
        assert!(american > european + 0.01);
    }

    #[test]
    fn swapping_the_initial_prices_leaves_the_price_unchanged() {
        let mut cfg = table_config(100.0, 150);
        cfg.market.s0 = vec![90.0, 110.0];
        let a = binomial_price(&cfg).unwrap();
        cfg.market.s0 = vec![110.0, 90.0];
        let b = binomial_price(&cfg).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn vanishing_volatility_prices_deterministic_exercise() {
        // Deep in the money with negative carry: immediate exercise is
        // optimal and the price collapses to intrinsic value.
        let cfg = BinomialConfig {
            steps: 100,
            market: MarketConfig {
                s0: vec![200.0],
                rate: 0.05,
                dividend: 0.10,
                sigma: 1e-8,
                horizon: 1.0,
            },
            payoff: PayoffSpec::max_call(100.0).unwrap(),
        };
        let price = binomial_price(&cfg).unwrap();
        assert!((price - 100.0).abs() < 1e-3, "deterministic tree priced {price}");
    }

    #[test]
    fn one_asset_tree_matches_known_american_call() {
        // Without dividends the American call equals the European call;
        // verify against the same tree's European sweep.
        let cfg = BinomialConfig {
            steps: 500,
            market: MarketConfig {
                s0: vec![100.0],
                rate: 0.05,
                dividend: 0.0,
                sigma: 0.2,
                horizon: 1.0,
            },
            payoff: PayoffSpec::max_call(100.0).unwrap(),
        };
        let american = binomial_price(&cfg).unwrap();
        let european = binomial_european_price(&cfg).unwrap();
        assert!((american - european).abs() < 1e-9);
        // Black-Scholes value of this call is 10.4506 in the limit.
        assert!((european - 10.4506).abs() < 0.02);
    }

    #[test]
    fn dimension_guard() {
        let mut cfg = table_config(100.0, 10);
        cfg.market.s0 = vec![100.0; 3];
        match binomial_price(&cfg) {
            Err(Error::UnsupportedDimension(3)) => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
        cfg.market.s0 = vec![100.0, 100.0];
        cfg.steps = 0;
        assert!(binomial_price(&cfg).is_err());
    }
}
