//! Desk-scale exploration of the large-penalization limit: the monotone
//! `n` sweep at fixed temperature, the endogenous default intensity of the
//! limiting singular generator, and a Monte Carlo check of the
//! defaultable-claim representation of the limit value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{MarketConfig, PathGrid, PayoffSpec, TimeGrid};
use crate::regression::BasisSpec;
use crate::rng;
use crate::schemes::{entropy_implicit, SchemeConfig, ValueSurface};

/// Default saturation level for the default intensity; the raw intensity
/// explodes as the value approaches the payoff barrier.
pub const DEFAULT_GAMMA_CAP: f64 = 1e6;

/// Shared setup for the singular-limit checks.
#[derive(Debug, Clone)]
pub struct SingularConfig {
    pub market: MarketConfig,
    pub payoff: PayoffSpec,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub theta: f64,
    pub newton_max_iter: u32,
    pub newton_tol: f64,
    pub basis: BasisSpec,
    pub gamma_cap: f64,
    /// The representation is stated without discounting; this flag switches
    /// on an exploratory discounted variant using the market rate.
    pub discounted: bool,
}

impl SingularConfig {
    pub fn new(market: MarketConfig, payoff: PayoffSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Self {
        SingularConfig {
            market,
            payoff,
            grid,
            n_paths,
            seed,
            theta: 1.0,
            newton_max_iter: 20,
            newton_tol: 1e-10,
            basis: BasisSpec::default_13(),
            gamma_cap: DEFAULT_GAMMA_CAP,
            discounted: false,
        }
    }

    fn scheme_config(&self, lambda: f64, n: f64, r: f64) -> Result<SchemeConfig> {
        let mut cfg = SchemeConfig::entropy(lambda, n, r)?;
        cfg.theta = self.theta;
        cfg.newton_max_iter = self.newton_max_iter;
        cfg.newton_tol = self.newton_tol;
        Ok(cfg)
    }
}

/// Prices of the entropy scheme along an increasing sequence of
/// penalization levels, on common paths.
#[derive(Debug, Clone)]
pub struct NSweepReport {
    pub lambda: f64,
    pub n_values: Vec<f64>,
    pub prices: Vec<f64>,
    /// Most negative successive price difference, clamped at zero when the
    /// sequence is monotone.
    pub monotone_violation: f64,
}

impl NSweepReport {
    /// CSV rows `lambda,n,price,monotone_violation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,n,price,monotone_violation\n");
        for (n, price) in self.n_values.iter().zip(&self.prices) {
            out.push_str(&format!("{},{},{},{}\n", self.lambda, n, price, self.monotone_violation));
        }
        out
    }
}

/// Runs the entropy scheme for each level in `n_values` on one shared path
/// grid and reports the worst monotonicity violation.
pub fn n_sweep(cfg: &SingularConfig, lambda: f64, n_values: &[f64]) -> Result<NSweepReport> {
    if n_values.is_empty() {
        return Err(Error::Config("n sweep needs at least one level".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("n values must be strictly increasing".into()));
    }
    let paths = crate::market::simulate_paths(&cfg.market, &cfg.grid, cfg.n_paths, cfg.seed)?;

    let mut prices = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let scheme = cfg.scheme_config(lambda, n, cfg.market.rate)?;
        let surface = entropy_implicit(&paths, &cfg.payoff, &scheme, &cfg.basis)?;
        prices.push(surface.price);
    }

    let monotone_violation = prices
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::min);

    Ok(NSweepReport { lambda, n_values: n_values.to_vec(), prices, monotone_violation })
}

/// Endogenous default intensity of the singular limit,
/// `γ = λ ln(λ/(v − p)) / (p + λ − v)`, evaluated through the stable form
/// `ln(1 + ε)/ε` with `ε = (v − p)/λ − 1`. The removable singularity at
/// `v − p = λ` is filled with 1; values are capped at `cap`, and the cap is
/// returned whenever `v <= p`.
pub fn default_intensity(p: f64, v: f64, lambda: f64, cap: f64) -> f64 {
    if !(v > p) {
        return cap;
    }
    let eps = (v - p) / lambda - 1.0;
    let gamma = if eps.abs() < 1e-8 { 1.0 - 0.5 * eps } else { eps.ln_1p() / eps };
    gamma.min(cap)
}

/// Monte Carlo check of the defaultable-claim representation.
#[derive(Debug, Clone)]
pub struct DefaultCheckReport {
    /// Proxy for the limit value: the entropy price at the largest level.
    pub v_lambda_0: f64,
    /// Estimate of the stopped defaultable payoff.
    pub rep_estimate: f64,
    pub std_error: f64,
    pub epsilon_stop: f64,
    /// Grid points where the intensity cap engaged.
    pub cap_engagements: u64,
    /// Worst gap between the empirical survival frequency and the pathwise
    /// average of `e^{-Γ}` across grid times.
    pub survival_gap: f64,
}

impl DefaultCheckReport {
    /// CSV row; pair with [`default_check_csv_header`].
    pub fn to_csv_row(&self, lambda: f64, n_proxy: f64) -> String {
        format!(
            "{},{},{},{},{},{},{},{}\n",
            lambda,
            n_proxy,
            self.epsilon_stop,
            self.rep_estimate,
            self.std_error,
            self.v_lambda_0,
            self.cap_engagements,
            self.survival_gap
        )
    }
}

pub fn default_check_csv_header() -> &'static str {
    "lambda,n_proxy,epsilon_stop,estimate,std_error,v_lambda_proxy,cap_engagements,survival_gap\n"
}

/// Precomputed state for the defaultable-claim check: paths, the proxy value
/// surface, the capped intensity field and its trapezoidal hazard. Reused
/// across stopping-threshold sweeps.
pub struct DefaultCheckContext {
    paths: PathGrid,
    surface: ValueSurface,
    payoff: PayoffSpec,
    lambda: f64,
    rate: f64,
    discounted: bool,
    /// Γ at every grid node, paths × (steps + 1), trapezoidal accumulation.
    cum_hazard: Vec<f64>,
    cap_engagements: u64,
}

impl DefaultCheckContext {
    pub fn new(cfg: &SingularConfig, lambda: f64, n_proxy: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if n_proxy < 1000.0 {
            return Err(Error::Config(format!(
                "the limit proxy needs a large penalization level (>= 1000), got {n_proxy}"
            )));
        }
        let rate = if cfg.discounted { cfg.market.rate } else { 0.0 };
        let paths = crate::market::simulate_paths(&cfg.market, &cfg.grid, cfg.n_paths, cfg.seed)?;
        let scheme = cfg.scheme_config(lambda, n_proxy, rate)?;
        let surface = entropy_implicit(&paths, &cfg.payoff, &scheme, &cfg.basis)?;

        let n_steps = cfg.grid.steps;
        let stride = n_steps + 1;
        let dt = cfg.grid.dt;
        let cap = cfg.gamma_cap;
        let payoff = cfg.payoff;

        let mut gammas = vec![0.0f64; cfg.n_paths * stride];
        gammas.par_chunks_mut(stride).enumerate().for_each(|(p, row)| {
            for (k, g) in row.iter_mut().enumerate() {
                *g = default_intensity(
                    paths.payoff_at(&payoff, p, k),
                    surface.value(p, k),
                    lambda,
                    cap,
                );
            }
        });
        let cap_engagements = gammas.iter().filter(|&&g| g >= cap).count() as u64;

        let mut cum_hazard = vec![0.0f64; cfg.n_paths * stride];
        cum_hazard.par_chunks_mut(stride).enumerate().for_each(|(p, row)| {
            let mut acc = 0.0;
            for k in 1..=n_steps {
                acc += 0.5 * dt * (gammas[p * stride + k - 1] + gammas[p * stride + k]);
                row[k] = acc;
            }
        });

        Ok(DefaultCheckContext {
            paths,
            surface,
            payoff,
            lambda,
            rate,
            discounted: cfg.discounted,
            cum_hazard,
            cap_engagements,
        })
    }

    pub fn v_lambda_proxy(&self) -> f64 {
        self.surface.price
    }

    pub fn surface(&self) -> &ValueSurface {
        &self.surface
    }

    /// Runs the representation check with the stopping rule
    /// `τ = first t_k with V <= P + epsilon_stop` and default times drawn
    /// from independent standard exponentials under `seed`.
    pub fn run(&self, epsilon_stop: f64, seed: u64) -> Result<DefaultCheckReport> {
        if !(epsilon_stop > 0.0) {
            return Err(Error::Config(format!("epsilon_stop must be > 0, got {epsilon_stop}")));
        }
        let n_paths = self.paths.n_paths;
        let n_steps = self.paths.grid.steps;
        let stride = n_steps + 1;

        let mut payouts = vec![0.0f64; n_paths];
        let mut survived = vec![0u32; stride];
        let mut defaulted_at: Vec<usize> = vec![usize::MAX; n_paths];

        payouts
            .par_iter_mut()
            .zip(defaulted_at.par_iter_mut())
            .enumerate()
            .for_each(|(p, (out, default_idx))| {
                let clock = rng::standard_exponential(seed, rng::STREAM_DEFAULT_TIMES, p as u64, 0);

                let mut tau = n_steps;
                for k in 0..=n_steps {
                    let barrier =
                        self.paths.payoff_at(&self.payoff, p, k) + epsilon_stop;
                    if self.surface.value(p, k) <= barrier {
                        tau = k;
                        break;
                    }
                }

                let mut sigma = usize::MAX;
                for k in 1..=n_steps {
                    if self.cum_hazard[p * stride + k] >= clock {
                        sigma = k;
                        break;
                    }
                }
                *default_idx = sigma;

                let discount = |k: usize| {
                    if self.discounted {
                        (-self.rate * self.paths.grid.time(k)).exp()
                    } else {
                        1.0
                    }
                };
                *out = if sigma <= tau {
                    discount(sigma) * (self.paths.payoff_at(&self.payoff, p, sigma) + self.lambda)
                } else {
                    discount(tau) * self.paths.payoff_at(&self.payoff, p, tau)
                };
            });

        for &sigma in &defaulted_at {
            for (k, s) in survived.iter_mut().enumerate() {
                if sigma == usize::MAX || sigma > k {
                    *s += 1;
                }
            }
        }
        let mut survival_gap = 0.0f64;
        for k in 0..stride {
            let freq = survived[k] as f64 / n_paths as f64;
            let mut model = 0.0;
            for p in 0..n_paths {
                model += (-self.cum_hazard[p * stride + k]).exp();
            }
            model /= n_paths as f64;
            survival_gap = survival_gap.max((freq - model).abs());
        }

        let n = n_paths as f64;
        let mean = payouts.iter().sum::<f64>() / n;
        let var = payouts.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / if n_paths > 1 { n - 1.0 } else { 1.0 };

        Ok(DefaultCheckReport {
            v_lambda_0: self.surface.price,
            rep_estimate: mean,
            std_error: (var / n).sqrt(),
            epsilon_stop,
            cap_engagements: self.cap_engagements,
            survival_gap,
        })
    }
}

/// One-shot convenience wrapper around [`DefaultCheckContext`].
pub fn defaultable_mc_check(
    cfg: &SingularConfig,
    lambda: f64,
    n_proxy: f64,
    epsilon_stop: f64,
    seed: u64,
) -> Result<DefaultCheckReport> {
    DefaultCheckContext::new(cfg, lambda, n_proxy)?.run(epsilon_stop, seed)
}
