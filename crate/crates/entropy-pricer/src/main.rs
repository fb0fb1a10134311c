use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entropy_pricer::error::Error;
use entropy_pricer::experiment::{
    emit_report, run_experiment, table1_config, ExperimentConfig, SchemeSelector, DEFAULT_TABLE_SEED,
};
use entropy_pricer::market::{simulate_paths, MarketConfig, PayoffKind, PayoffSpec, TimeGrid};
use entropy_pricer::regression::BasisSpec;
use entropy_pricer::schemes::entropy_implicit_with_model;
use entropy_pricer::singular::{
    default_check_csv_header, n_sweep, DefaultCheckContext, SingularConfig,
};

#[derive(Parser)]
#[command(
    name = "entropy-pricer",
    about = "Monte Carlo pricing of American max-call options via entropy-regularized penalization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SharedArgs {
    /// Initial price level applied to every asset.
    #[arg(long)]
    s0: Option<f64>,
    /// Penalization level.
    #[arg(long)]
    n: Option<f64>,
    /// Temperature; defaults to the coupling 1/n.
    #[arg(long)]
    lambda: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Time grid steps (tree steps for the binomial scheme).
    #[arg(long)]
    steps: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Implicitness weight in [0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TOML experiment configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Price one scheme at one (s0, n) cell.
    Price {
        /// One of: classical, implicit, pia, policy, binomial.
        #[arg(long)]
        scheme: String,
        #[command(flatten)]
        shared: SharedArgs,
        /// Export the simulated paths as CSV (path,step,asset,price).
        #[arg(long)]
        export_paths: Option<PathBuf>,
        /// Dump fitted regression coefficients as CSV (implicit scheme only).
        #[arg(long)]
        dump_coefficients: Option<PathBuf>,
    },
    /// Reproduce the full benchmark grid (3 spots x 3 levels x 4 schemes
    /// plus the binomial benchmark).
    Table1 {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Price the entropy scheme along an increasing sequence of levels.
    Nsweep {
        #[command(flatten)]
        shared: SharedArgs,
        /// Comma-separated penalization levels.
        #[arg(long, default_value = "2,4,8,16,32,64")]
        n_list: String,
    },
    /// Monte Carlo check of the defaultable-claim representation on a small
    /// single-asset zero-rate market.
    Defaultcheck {
        #[command(flatten)]
        shared: SharedArgs,
        /// Limit proxy level (at least 1000).
        #[arg(long, default_value_t = 1000.0)]
        n_proxy: f64,
        /// Comma-separated stopping thresholds as fractions of lambda.
        #[arg(long, default_value = "0.5,0.1,0.01")]
        eps_list: String,
    },
    /// Run the analytic property checks of the generator kernels.
    Proptest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Price { scheme, shared, export_paths, dump_coefficients } => {
            price_command(&scheme, shared, export_paths, dump_coefficients)
        }
        Command::Table1 { shared } => {
            let mut config = match &shared.config {
                Some(path) => ExperimentConfig::from_toml_file(path)?,
                None => table1_config(100_000, DEFAULT_TABLE_SEED),
            };
            apply_overrides(&mut config, &shared);
            let report = run_experiment(&config)?;
            emit_report(&report, shared.output.as_deref())?;
            Ok(if report.has_errors() { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::Nsweep { shared, n_list } => nsweep_command(shared, &n_list),
        Command::Defaultcheck { shared, n_proxy, eps_list } => {
            defaultcheck_command(shared, n_proxy, &eps_list)
        }
        Command::Proptest => {
            let mut all_passed = true;
            for check in entropy_pricer::drivers::checks::run_driver_checks() {
                let status = if check.passed { "pass" } else { "FAIL" };
                println!("{status}  {:<32} {}", check.name, check.detail);
                all_passed &= check.passed;
            }
            Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn apply_overrides(config: &mut ExperimentConfig, shared: &SharedArgs) {
    if let Some(s0) = shared.s0 {
        config.s0_values = vec![s0];
    }
    if let Some(n) = shared.n {
        config.n_values = vec![n];
    }
    if shared.lambda.is_some() {
        config.lambda = shared.lambda;
    }
    if let Some(paths) = shared.paths {
        config.n_paths = paths;
    }
    if let Some(steps) = shared.steps {
        config.steps = steps;
    }
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    if let Some(theta) = shared.theta {
        config.theta = theta;
    }
}

fn price_command(
    scheme: &str,
    shared: SharedArgs,
    export_paths: Option<PathBuf>,
    dump_coefficients: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let selector = SchemeSelector::parse(scheme)?;
    let mut config = match &shared.config {
        Some(path) => ExperimentConfig::from_toml_file(path)?,
        None => {
            let mut c = table1_config(10_000, DEFAULT_TABLE_SEED);
            c.s0_values = vec![100.0];
            c.n_values = vec![100.0];
            c
        }
    };
    apply_overrides(&mut config, &shared);
    config.schemes = match selector {
        // The policy bound is extracted from the implicit solution.
        SchemeSelector::Policy => vec![SchemeSelector::Policy],
        s => vec![s],
    };
    if selector == SchemeSelector::Binomial {
        if let Some(steps) = shared.steps {
            config.binomial_steps = steps;
            config.steps = table1_config(1, 0).steps;
        }
    }

    if let Some(path) = &export_paths {
        let grid = TimeGrid::new(config.steps, config.market.horizon)?;
        let market = config.market.with_spot(config.s0_values[0]);
        let paths = simulate_paths(&market, &grid, config.n_paths, config.seed)?;
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        paths.export_csv(&mut file)?;
    }

    if let Some(path) = &dump_coefficients {
        let grid = TimeGrid::new(config.steps, config.market.horizon)?;
        let market = config.market.with_spot(config.s0_values[0]);
        let paths = simulate_paths(&market, &grid, config.n_paths, config.seed)?;
        let n = config.n_values[0];
        let lambda = config.lambda.unwrap_or(1.0 / n);
        let mut scheme_cfg = entropy_pricer::schemes::SchemeConfig::entropy(
            lambda,
            n,
            config.market.rate,
        )?;
        scheme_cfg.theta = config.theta;
        let basis: BasisSpec = config.regression.basis(&config.market, config.payoff.strike);
        let (_, model) = entropy_implicit_with_model(&paths, &config.payoff, &scheme_cfg, &basis)?;
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        model.dump_csv(&mut file)?;
    }

    let report = run_experiment(&config)?;
    emit_report(&report, shared.output.as_deref())?;
    Ok(if report.has_errors() { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn parse_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad numeric list entry '{t}'")))
        })
        .collect()
}

fn nsweep_command(shared: SharedArgs, n_list: &str) -> Result<ExitCode, Error> {
    let lambda = shared.lambda.unwrap_or(0.1);
    let n_values = parse_list(n_list)?;
    let market = MarketConfig {
        s0: vec![shared.s0.unwrap_or(100.0); 2],
        rate: 0.05,
        dividend: 0.10,
        sigma: 0.2,
        horizon: 3.0,
    };
    let steps = shared.steps.unwrap_or(100);
    let grid = TimeGrid::new(steps, market.horizon)?;
    let payoff = PayoffSpec { kind: PayoffKind::MaxCall, strike: 100.0 };
    let mut cfg = SingularConfig::new(
        market,
        payoff,
        grid,
        shared.paths.unwrap_or(20_000),
        shared.seed.unwrap_or(DEFAULT_TABLE_SEED),
    );
    if let Some(theta) = shared.theta {
        cfg.theta = theta;
    }
    let report = n_sweep(&cfg, lambda, &n_values)?;
    let csv = report.to_csv();
    if let Some(path) = &shared.output {
        std::fs::write(path, &csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    print!("{csv}");
    println!("# worst monotonicity violation: {}", report.monotone_violation);
    Ok(ExitCode::SUCCESS)
}

fn defaultcheck_command(shared: SharedArgs, n_proxy: f64, eps_list: &str) -> Result<ExitCode, Error> {
    let lambda = shared.lambda.unwrap_or(0.5);
    let fractions = parse_list(eps_list)?;
    let market = MarketConfig {
        s0: vec![shared.s0.unwrap_or(100.0)],
        rate: 0.0,
        dividend: 0.10,
        sigma: 0.2,
        horizon: 0.5,
    };
    let steps = shared.steps.unwrap_or(50);
    let grid = TimeGrid::new(steps, market.horizon)?;
    let payoff = PayoffSpec { kind: PayoffKind::MaxCall, strike: 100.0 };
    let cfg = SingularConfig::new(
        market,
        payoff,
        grid,
        shared.paths.unwrap_or(20_000),
        shared.seed.unwrap_or(DEFAULT_TABLE_SEED),
    );
    let ctx = DefaultCheckContext::new(&cfg, lambda, n_proxy)?;
    let mut csv = String::from(default_check_csv_header());
    for (i, fraction) in fractions.iter().enumerate() {
        let report = ctx.run(fraction * lambda, cfg.seed.wrapping_add(i as u64))?;
        csv.push_str(&report.to_csv_row(lambda, n_proxy));
    }
    if let Some(path) = &shared.output {
        std::fs::write(path, &csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}
