use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Command;
use gmwb::{fair_fee, oracle, surrender, valuation, Error};

pub enum Report {
    Json(Value),
    Csv(String),
}

pub enum RunError {
    /// Bad inputs: exit 2.
    Config(String),
    /// The run itself failed (bracket, regression, lattice): exit 3 with
    /// JSON diagnostics.
    Numerical { kind: String, message: String },
}

impl From<Error> for RunError {
    fn from(err: Error) -> Self {
        match &err {
            Error::Validation(_) | Error::InvalidInput(_) => RunError::Config(err.to_string()),
            Error::BracketFailure { .. } => RunError::Numerical {
                kind: "bracket_failure".into(),
                message: err.to_string(),
            },
            Error::TreeProbability { .. } => RunError::Numerical {
                kind: "lattice_probability".into(),
                message: err.to_string(),
            },
            Error::NoSolutionNonpositiveRate(_) => RunError::Numerical {
                kind: "no_solution".into(),
                message: err.to_string(),
            },
            _ => RunError::Numerical {
                kind: "numerical_failure".into(),
                message: err.to_string(),
            },
        }
    }
}

pub fn run(command: &Command, config: &RunConfig, canonical: bool) -> Result<Report, RunError> {
    let started = Instant::now();
    let spec = config.contract()?;
    let market = config.market();

    let body = match command {
        Command::Price {
            export_paths,
            export_account,
            account_index,
        } => {
            let sim = config.sim()?;
            let report = valuation::decompose(&spec, &market, &sim)?;
            if export_paths.is_some() || export_account.is_some() {
                let paths = gmwb::PathSet::generate(
                    &market,
                    spec.fee_rate,
                    sim.grid,
                    sim.num_paths,
                    sim.seed,
                    sim.antithetic,
                )?;
                if let Some(path) = export_paths {
                    let file = std::fs::File::create(path).map_err(|e| {
                        RunError::Config(format!("creating {}: {e}", path.display()))
                    })?;
                    paths
                        .write_factors_binary(std::io::BufWriter::new(file))
                        .map_err(|e| RunError::Config(format!("writing paths: {e}")))?;
                }
                if let Some(path) = export_account {
                    let account = gmwb::account::evolve(&spec, &market, &paths, *account_index)?;
                    let z = paths.z_path(*account_index)?;
                    let csv = account.to_csv(&z)?;
                    std::fs::write(path, csv).map_err(|e| {
                        RunError::Config(format!("writing {}: {e}", path.display()))
                    })?;
                }
            }
            serde_json::to_value(&report).expect("serializable")
        }
        Command::FairFee => {
            let sim = config.sim()?;
            let tol = config.solver.tol_value.unwrap_or(5e-4 * spec.premium);
            let result = if config.solver.with_lapse {
                fair_fee::solve_fair_fee_with_lapse(
                    &spec,
                    &market,
                    &sim,
                    &config.fit_sim()?,
                    config.lsmc.exercise_stride,
                    &config.basis(),
                    tol,
                    config.solver.max_iter,
                )?
            } else {
                fair_fee::solve_fair_fee(&spec, &market, &sim, tol, config.solver.max_iter)?
            };
            serde_json::to_value(&result).expect("serializable")
        }
        Command::LapseValue {
            save_policy,
            load_policy,
        } => {
            let sim = config.sim()?;
            let policy = obtain_policy(config, &spec, &market, load_policy)?;
            if let Some(path) = save_policy {
                let json = serde_json::to_string_pretty(&policy).expect("policy serializes");
                std::fs::write(path, json)
                    .map_err(|e| RunError::Config(format!("writing {}: {e}", path.display())))?;
            }
            let report = surrender::price_with_lapse(&spec, &market, &sim, &policy)?;
            serde_json::to_value(&report).expect("serializable")
        }
        Command::Boundary { load_policy } => {
            let policy = obtain_policy(config, &spec, &market, load_policy)?;
            let boundary =
                surrender::exercise_boundary(&policy, config.lsmc.boundary_w_max * spec.premium);
            return Ok(Report::Csv(boundary.to_csv()));
        }
        Command::RuinProb => {
            let sim = config.sim()?;
            let estimate =
                gmwb::account::ruin_probability(&spec, &market, sim.grid, sim.num_paths, sim.seed)?;
            serde_json::to_value(estimate).expect("serializable")
        }
        Command::Surface => {
            let sim = gmwb::SimSettings::new(
                config.grid()?,
                config.surface.num_paths,
                config.engine.seed,
                config.engine.antithetic,
            );
            let surface = valuation::value_surface(
                &spec,
                &market,
                &sim,
                &config.surface.t_points,
                &config.surface.w_points,
            )?;
            return Ok(Report::Csv(surface.to_csv()));
        }
        Command::Oracle => match config.oracle.mode.as_str() {
            "deterministic" => {
                let solution = oracle::deterministic_value(&spec, &market)?;
                serde_json::to_value(solution).expect("serializable")
            }
            "tree" => {
                let valuation = oracle::tree_value(
                    &spec,
                    &market,
                    config.oracle.tree_steps_per_year,
                    config.oracle.with_lapse,
                    config.oracle.w_points,
                )?;
                serde_json::to_value(&valuation).expect("serializable")
            }
            other => {
                return Err(RunError::Config(format!(
                    "unknown oracle mode {other:?}; use \"deterministic\" or \"tree\""
                )))
            }
        },
    };

    let mut report = json!({
        "command": command_name(command),
        "config": serde_json::to_value(config).expect("config serializes"),
        "result": body,
    });
    if !canonical {
        let map = report.as_object_mut().expect("object");
        map.insert(
            "generated_at_unix".to_string(),
            json!(SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)),
        );
        map.insert(
            "elapsed_ms".to_string(),
            json!(started.elapsed().as_millis() as u64),
        );
    }
    Ok(Report::Json(report))
}

fn obtain_policy(
    config: &RunConfig,
    spec: &gmwb::ContractSpec,
    market: &gmwb::MarketParams,
    load_policy: &Option<std::path::PathBuf>,
) -> Result<gmwb::StoppingPolicy, RunError> {
    match load_policy {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| RunError::Config(format!("parsing policy {}: {e}", path.display())))
        }
        None => Ok(surrender::fit_policy(
            spec,
            market,
            &config.fit_sim()?,
            config.lsmc.exercise_stride,
            &config.basis(),
        )?),
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Price { .. } => "price",
        Command::FairFee => "fair-fee",
        Command::LapseValue { .. } => "lapse-value",
        Command::Boundary { .. } => "boundary",
        Command::RuinProb => "ruin-prob",
        Command::Surface => "surface",
        Command::Oracle => "oracle",
    }
}
