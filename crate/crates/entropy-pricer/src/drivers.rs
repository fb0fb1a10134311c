//! Numerically stable kernels for the generators used by every backward scheme.
//!
//! The central object is `Φ(x) = ln((e^x − 1)/x)`, extended continuously by
//! `Φ(0) = 0`, together with its rescalings `Φ_n(x) = ln((e^{nx} − 1)/x)` and
//! `Φ_{λ,n}(p, x) = λ Φ_n((p − x)/λ)`. The naive formulas overflow near
//! `x ≈ 710` and cancel catastrophically near zero, while the schemes evaluate
//! them at arguments `n (P − V)/λ` that routinely exceed 1e3, so every function
//! here is branched on the argument range.

use crate::error::{Error, Result};

/// Parameters shared by every entropy-regularized generator: temperature
/// `lambda`, penalization level `n` and discount rate `r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriverParams {
    /// Temperature, in (0, 1] for the entropy schemes.
    pub lambda: f64,
    /// Penalization / truncation level, at least 1 for the entropy schemes.
    /// Classical penalization also accepts `n = 0` (zero penalty).
    pub n: f64,
    /// Continuously compounded discount rate, non-negative.
    pub r: f64,
}

impl DriverParams {
    /// Parameters validated for the entropy-regularized schemes.
    pub fn new(lambda: f64, n: f64, r: f64) -> Result<Self> {
        let params = Self { lambda, n, r };
        params.validate_entropy()?;
        Ok(params)
    }

    /// Coupled parameters `lambda = 1/n`.
    pub fn coupled(n: f64, r: f64) -> Result<Self> {
        Self::new(1.0 / n, n, r)
    }

    pub fn validate_entropy(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!(
                "temperature lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(Error::Config(format!("penalization level n must be >= 1, got {}", self.n)));
        }
        self.validate_rate()
    }

    /// Classical penalization ignores `lambda` and allows `n = 0`.
    pub fn validate_classical(&self) -> Result<()> {
        if !(self.n >= 0.0) || !self.n.is_finite() {
            return Err(Error::Config(format!("penalization level n must be >= 0, got {}", self.n)));
        }
        self.validate_rate()
    }

    fn validate_rate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::Config(format!("discount rate r must be >= 0, got {}", self.r)));
        }
        Ok(())
    }
}

/// `Φ(x) = ln((e^x − 1)/x)`, continuous at 0 with `Φ(0) = 0`.
pub fn phi(x: f64) -> Result<f64> {
    require_finite("phi", x)?;
    Ok(raw::phi(x))
}

/// `Ψ(x) = Φ(x)/x`, a cumulative distribution function with `Ψ(0) = 1/2`.
pub fn psi(x: f64) -> Result<f64> {
    require_finite("psi", x)?;
    Ok(raw::psi(x))
}

/// `Φ_n(x) = ln((e^{nx} − 1)/x)`, continuous at 0 with `Φ_n(0) = ln n`.
pub fn phi_n(x: f64, n: f64) -> Result<f64> {
    require_finite("phi_n", x)?;
    require_level(n)?;
    Ok(raw::phi_n(x, n))
}

/// `Φ_{λ,n}(p, x) = λ Φ_n((p − x)/λ)`, the truncated entropy generator as a
/// function of the value `x` given the payoff level `p`. Decreasing in `x`,
/// with unique root at `p − λ Φ_n^{-1}(0)`.
pub fn phi_lambda_n(p: f64, x: f64, params: &DriverParams) -> Result<f64> {
    require_finite("phi_lambda_n", p)?;
    require_finite("phi_lambda_n", x)?;
    params.validate_entropy()?;
    Ok(params.lambda * raw::phi_n((p - x) / params.lambda, params.n))
}

/// The singular `n → ∞` limit of the generator: `λ ln(λ/(x − p))` for
/// `x > p` and positive infinity otherwise.
pub fn phi_lambda_inf(p: f64, x: f64, lambda: f64) -> f64 {
    if x > p {
        lambda * (lambda / (x - p)).ln()
    } else {
        f64::INFINITY
    }
}

/// The root `Φ_n^{-1}(0)` of `Φ_n`, i.e. the solution of
/// `e^{nx} − x − 1 = 0` in (−1, 0]. Exact 0 for `n = 1`; bisection on
/// `[−1 + 1e−15, −ln(n)/n]` otherwise, accurate to 1e−12 or better.
pub fn phi_n_root(n: f64) -> Result<f64> {
    require_level(n)?;
    if n == 1.0 {
        return Ok(0.0);
    }
    // f(x) = e^{nx} − x − 1 computed through expm1 to keep precision near 0.
    let f = |x: f64| (n * x).exp_m1() - x;
    let mut lo = -1.0 + 1e-15;
    // The minimizer of f; f is negative there and positive at −1 for moderate n.
    let mut hi = -n.ln() / n;
    if f(lo) <= 0.0 {
        // True root lies within one bisection tolerance of −1.
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gibbs policy density `α e^{αu} / (e^{αn} − 1)` on `u ∈ [0, n]`, with the
/// uniform limit `1/n` at `α = 0`.
pub fn gibbs_density(alpha: f64, n: f64, u: f64) -> Result<f64> {
    require_level(n)?;
    if !(0.0..=n).contains(&u) {
        return Err(Error::Domain(format!("gibbs_density: u = {u} outside [0, {n}]")));
    }
    require_finite("gibbs_density", alpha)?;
    Ok(raw::gibbs_density(alpha, n, u))
}

/// Mean of the Gibbs policy, `μ(α, n) = n/(1 − e^{−αn}) − 1/α`, valued in
/// `(0, n)` with the removable singularity `μ(0, n) = n/2`.
pub fn gibbs_mean(alpha: f64, n: f64) -> f64 {
    debug_assert!(n >= 1.0);
    raw::gibbs_mean(alpha, n)
}

fn require_finite(op: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{op}: non-finite argument {x}")))
    }
}

fn require_level(n: f64) -> Result<()> {
    if n >= 1.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("penalization level n must be >= 1, got {n}")))
    }
}

/// Unchecked kernels for the schemes' inner loops. Callers guarantee finite
/// arguments and `n >= 1`.
pub(crate) mod raw {
    /// Stable `Φ`. Branches: asymptotic forms beyond |x| = 30, Taylor series
    /// inside |x| < 1e−4, direct `ln(expm1(x)/x)` in between.
    #[inline]
    pub fn phi(x: f64) -> f64 {
        if x >= 30.0 {
            x - x.ln() + (-(-x).exp()).ln_1p()
        } else if x <= -30.0 {
            (-x.exp()).ln_1p() - (-x).ln()
        } else if x.abs() < 1e-4 {
            let x2 = x * x;
            0.5 * x + x2 / 24.0 - x2 * x2 / 2880.0
        } else {
            (x.exp_m1() / x).ln()
        }
    }

    /// `Φ'(x) = 1/(1 − e^{−x}) − 1/x`, valued in [0, 1].
    #[inline]
    pub fn phi_prime(x: f64) -> f64 {
        if x.abs() < 1e-2 {
            0.5 + x / 12.0 - x * x * x / 720.0
        } else {
            1.0 / (-(-x).exp_m1()) - 1.0 / x
        }
    }

    /// `Ψ(x) = Φ(x)/x`, with `Ψ(0) = 1/2`.
    #[inline]
    pub fn psi(x: f64) -> f64 {
        if x.abs() < 1e-4 {
            0.5 + x / 24.0 - x * x * x / 2880.0
        } else {
            phi(x) / x
        }
    }

    /// Stable `Φ_n`, branched on `y = n·x` exactly like `phi`.
    #[inline]
    pub fn phi_n(x: f64, n: f64) -> f64 {
        let y = n * x;
        if y >= 30.0 {
            y - x.ln() + (-(-y).exp()).ln_1p()
        } else if y <= -30.0 {
            (-y.exp()).ln_1p() - (-x).ln()
        } else if y.abs() < 1e-4 {
            let y2 = y * y;
            n.ln() + 0.5 * y + y2 / 24.0 - y2 * y2 / 2880.0
        } else {
            (y.exp_m1() / x).ln()
        }
    }

    /// `λ Φ_n((p − x)/λ)` without validation.
    #[inline]
    pub fn phi_lambda_n(p: f64, x: f64, lambda: f64, n: f64) -> f64 {
        lambda * phi_n((p - x) / lambda, n)
    }

    #[inline]
    pub fn gibbs_density(alpha: f64, n: f64, u: f64) -> f64 {
        let y = alpha * n;
        if y.abs() < 1e-8 {
            1.0 / n
        } else if alpha > 0.0 {
            alpha * (alpha * (u - n)).exp() / (-(-y).exp_m1())
        } else {
            -alpha * (alpha * u).exp() / (-y.exp_m1())
        }
    }

    /// `μ(α, n) = n/(1 − e^{−αn}) − 1/α`; series below |αn| = 1e−4 to dodge
    /// the cancellation of the two O(1/α) terms.
    #[inline]
    pub fn gibbs_mean(alpha: f64, n: f64) -> f64 {
        let y = alpha * n;
        if y.abs() < 1e-4 {
            0.5 * n + alpha * n * n / 12.0
        } else {
            n / (-(-y).exp_m1()) - 1.0 / alpha
        }
    }
}

/// Grid-based verification of the analytic properties the schemes rely on.
/// Exposed so the command-line `proptest` mode can run the battery directly.
pub mod checks {
    use super::{phi_n_root, raw};

    /// Outcome of one named property check.
    #[derive(Debug, Clone)]
    pub struct CheckResult {
        pub name: &'static str,
        pub passed: bool,
        pub detail: String,
    }

    impl CheckResult {
        fn pass(name: &'static str, detail: String) -> Self {
            CheckResult { name, passed: true, detail }
        }

        fn fail(name: &'static str, detail: String) -> Self {
            CheckResult { name, passed: false, detail }
        }
    }

    fn grid(a: f64, b: f64, points: usize) -> Vec<f64> {
        let h = (b - a) / (points - 1) as f64;
        (0..points).map(|i| a + h * i as f64).collect()
    }

    /// Runs every driver property check and reports one result per property.
    pub fn run_driver_checks() -> Vec<CheckResult> {
        vec![
            lipschitz_phi(),
            phi_n_slope_bound(),
            phi_n_monotone_in_n(),
            psi_is_cdf(),
            penalization_gap_bound(),
            power_ratio_monotone(),
            root_bounds_and_ordering(),
            generator_derivative_bound(),
            rescale_consistency(),
        ]
    }

    /// 0 <= (Φ(y) − Φ(x))/(y − x) <= 1 on a grid over [−50, 50].
    fn lipschitz_phi() -> CheckResult {
        let name = "phi_lipschitz_1";
        let xs = grid(-50.0, 50.0, 4001);
        let mut worst: f64 = 0.5;
        for w in xs.windows(2) {
            let slope = (raw::phi(w[1]) - raw::phi(w[0])) / (w[1] - w[0]);
            if !(-1e-9..=1.0 + 1e-9).contains(&slope) {
                return CheckResult::fail(name, format!("slope {slope} at x = {}", w[0]));
            }
            worst = worst.max(slope);
        }
        CheckResult::pass(name, format!("max slope {worst:.9}"))
    }

    /// 0 <= Φ_n' <= n via finite differences, n in {1, 2, 5, 100}.
    fn phi_n_slope_bound() -> CheckResult {
        let name = "phi_n_slope_in_0_n";
        let xs = grid(-50.0, 50.0, 4001);
        for &n in &[1.0, 2.0, 5.0, 100.0] {
            for w in xs.windows(2) {
                let slope = (raw::phi_n(w[1], n) - raw::phi_n(w[0], n)) / (w[1] - w[0]);
                let hi = n * (1.0 + 1e-7);
                if !(-1e-7 * n..=hi).contains(&slope) {
                    return CheckResult::fail(
                        name,
                        format!("slope {slope} outside [0, {n}] at x = {}", w[0]),
                    );
                }
            }
        }
        CheckResult::pass(name, "n in {1, 2, 5, 100}".into())
    }

    /// Φ_n(x) non-decreasing in n for fixed x.
    fn phi_n_monotone_in_n() -> CheckResult {
        let name = "phi_n_monotone_in_n";
        let xs = grid(-50.0, 50.0, 2001);
        let levels = [1.0, 2.0, 5.0, 100.0];
        for pair in levels.windows(2) {
            for &x in &xs {
                let lo = raw::phi_n(x, pair[0]);
                let hi = raw::phi_n(x, pair[1]);
                if hi < lo - 1e-12 {
                    return CheckResult::fail(
                        name,
                        format!("phi_{}({x}) = {hi} < phi_{}({x}) = {lo}", pair[1], pair[0]),
                    );
                }
            }
        }
        CheckResult::pass(name, "n pairs from {1, 2, 5, 100}".into())
    }

    /// Ψ non-decreasing, valued in [0, 1], with the stated tail bounds.
    fn psi_is_cdf() -> CheckResult {
        let name = "psi_is_cdf";
        let xs = grid(-50.0, 50.0, 4001);
        let mut prev = f64::NEG_INFINITY;
        for &x in &xs {
            let v = raw::psi(x);
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return CheckResult::fail(name, format!("psi({x}) = {v} outside [0, 1]"));
            }
            if v < prev - 1e-12 {
                return CheckResult::fail(name, format!("psi decreasing at x = {x}"));
            }
            prev = v;
        }
        let (lo, hi) = (raw::psi(-50.0), raw::psi(50.0));
        if lo >= 0.1 || hi <= 0.9 {
            return CheckResult::fail(name, format!("tails psi(-50) = {lo}, psi(50) = {hi}"));
        }
        CheckResult::pass(name, format!("psi(-50) = {lo:.4}, psi(50) = {hi:.4}"))
    }

    /// 0 <= x+ − cΦ(x/c) <= ε − c ln(1 − e^{−ε/c}) + c [ln|x|]+ − c ln c.
    fn penalization_gap_bound() -> CheckResult {
        let name = "penalization_gap_bound";
        let xs = grid(-20.0, 20.0, 1601);
        for &c in &[0.01f64, 0.1, 1.0] {
            for &eps in &[0.1f64, 0.5, 0.9] {
                let offset = eps - c * (-(-eps / c).exp()).ln_1p() - c * c.ln();
                for &x in &xs {
                    let gap = x.max(0.0) - c * raw::phi(x / c);
                    let log_term = if x == 0.0 { 0.0 } else { x.abs().ln().max(0.0) };
                    let upper = offset + c * log_term;
                    if !(-1e-12..=upper + 1e-12).contains(&gap) {
                        return CheckResult::fail(
                            name,
                            format!("gap {gap} outside [0, {upper}] at (x, c, eps) = ({x}, {c}, {eps})"),
                        );
                    }
                }
            }
        }
        CheckResult::pass(name, "c in {0.01, 0.1, 1}, eps in {0.1, 0.5, 0.9}".into())
    }

    /// f(x) = (x^n − 1)/(x^m − 1) increasing on (0, 1) for n > m.
    fn power_ratio_monotone() -> CheckResult {
        let name = "power_ratio_monotone";
        let xs = grid(1e-3, 1.0 - 1e-3, 2001);
        for &(n, m) in &[(3.0, 2.0), (5.0, 2.0), (10.0, 7.0)] {
            let f = |x: f64| (x.powf(n) - 1.0) / (x.powf(m) - 1.0);
            let mut prev = f(xs[0]);
            for &x in &xs[1..] {
                let v = f(x);
                if v < prev - 1e-10 {
                    return CheckResult::fail(name, format!("ratio decreasing at x = {x}, (n, m) = ({n}, {m})"));
                }
                prev = v;
            }
        }
        CheckResult::pass(name, "(n, m) in {(3,2), (5,2), (10,7)}".into())
    }

    /// Roots lie in [−1, 0], satisfy |root + 1| <= 1/n and decrease in n.
    fn root_bounds_and_ordering() -> CheckResult {
        let name = "phi_n_root_bounds";
        let mut prev = f64::INFINITY;
        for n in 1..=1000u32 {
            let root = match phi_n_root(n as f64) {
                Ok(r) => r,
                Err(e) => return CheckResult::fail(name, format!("solver failed at n = {n}: {e}")),
            };
            if !(-1.0..=0.0).contains(&root) {
                return CheckResult::fail(name, format!("root {root} outside [-1, 0] at n = {n}"));
            }
            if (root + 1.0).abs() > 1.0 / n as f64 + 1e-12 {
                return CheckResult::fail(name, format!("|root + 1| > 1/n at n = {n}"));
            }
            if root > prev + 1e-12 {
                return CheckResult::fail(name, format!("root increased at n = {n}"));
            }
            prev = root;
        }
        CheckResult::pass(name, "n = 1..=1000".into())
    }

    /// |d/dx Φ_{λ,n}| <= max(1, 1/|Φ_2^{-1}(0)|) right of the generator root.
    fn generator_derivative_bound() -> CheckResult {
        let name = "generator_derivative_bound";
        let root2 = phi_n_root(2.0).expect("n = 2 is valid");
        let bound = 1.0f64.max(1.0 / root2.abs()) + 1e-6;
        let p = 1.0;
        for &lambda in &[0.01, 0.1, 1.0] {
            for &n in &[1.0, 2.0, 5.0, 100.0] {
                let left = p - lambda * phi_n_root(n).expect("valid n");
                let xs = grid(left, p + 10.0, 2001);
                for w in xs.windows(2) {
                    let slope = (raw::phi_lambda_n(p, w[1], lambda, n)
                        - raw::phi_lambda_n(p, w[0], lambda, n))
                        / (w[1] - w[0]);
                    if slope.abs() > bound {
                        return CheckResult::fail(
                            name,
                            format!("|slope| = {} > {bound} at (lambda, n) = ({lambda}, {n})", slope.abs()),
                        );
                    }
                }
            }
        }
        CheckResult::pass(name, format!("bound {bound:.6}"))
    }

    /// λΦ_n((p − x)/λ) computed directly and through Φ plus the rescale
    /// identity agree to 1e−10 relative.
    fn rescale_consistency() -> CheckResult {
        let name = "rescale_consistency";
        for &lambda in &[0.001, 0.01, 0.1, 1.0] {
            for &n in &[1.0, 2.0, 10.0, 100.0, 1000.0] {
                for &diff in &[-150.0, -5.0, -0.3, 0.0, 1e-7, 0.3, 5.0, 150.0] {
                    let direct = lambda * raw::phi_n(diff / lambda, n);
                    let rescaled = lambda * (raw::phi(n * diff / lambda) + n.ln());
                    let scale = direct.abs().max(rescaled.abs()).max(1e-30);
                    if (direct - rescaled).abs() > 1e-10 * scale {
                        return CheckResult::fail(
                            name,
                            format!(
                                "routes differ: {direct} vs {rescaled} at (lambda, n, p - x) = ({lambda}, {n}, {diff})"
                            ),
                        );
                    }
                }
            }
        }
        CheckResult::pass(name, "lambda, n, p - x grid".into())
    }
}
