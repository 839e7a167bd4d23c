use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use gmwb::{CdscStep, ContractSpec, MarketParams, SimSettings, TimeGrid};

/// One run configuration: contract and market fields at the top level, an
/// engine block, and optional command-specific blocks. Unknown fields are
/// rejected everywhere.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub premium: f64,
    pub withdrawal_rate: f64,
    pub fee_rate: f64,
    #[serde(default)]
    pub cdsc: Vec<CdscStep>,
    pub r: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub lsmc: LsmcConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub steps_per_year: u32,
    pub num_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            steps_per_year: 252,
            num_paths: 100_000,
            seed: 42,
            antithetic: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Tolerance on |V0 - P|; defaults to 5e-4 of the premium.
    pub tol_value: Option<f64>,
    pub max_iter: u32,
    /// Solve against the lapse-model value instead of the no-lapse value.
    pub with_lapse: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_value: None,
            max_iter: 30,
            with_lapse: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsmcConfig {
    pub fit_paths: usize,
    pub fit_seed: u64,
    /// Exercise at every N-th grid step.
    pub exercise_stride: usize,
    pub basis_degree: u8,
    pub kink_feature: bool,
    /// Scan ceiling for the exercise boundary, as a multiple of the premium.
    pub boundary_w_max: f64,
}

impl Default for LsmcConfig {
    fn default() -> Self {
        LsmcConfig {
            fit_paths: 20_000,
            fit_seed: 777,
            exercise_stride: 1,
            basis_degree: 3,
            kink_feature: true,
            boundary_w_max: 4.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub t_points: Vec<f64>,
    pub w_points: Vec<f64>,
    /// Paths per surface point; the engine path count is usually too large
    /// to spend on every point.
    pub num_paths: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            t_points: Vec::new(),
            w_points: Vec::new(),
            num_paths: 20_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// "deterministic" (sigma = 0 closed forms) or "tree".
    pub mode: String,
    pub tree_steps_per_year: u32,
    pub with_lapse: bool,
    pub w_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            mode: "deterministic".to_string(),
            tree_steps_per_year: 12,
            with_lapse: false,
            w_points: 401,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text).context("parsing configuration")?;
        Ok(config)
    }

    pub fn apply_overrides(&mut self, seed: Option<u64>, paths: Option<usize>, steps: Option<u32>) {
        if let Some(seed) = seed {
            self.engine.seed = seed;
        }
        if let Some(paths) = paths {
            self.engine.num_paths = paths;
        }
        if let Some(steps) = steps {
            self.engine.steps_per_year = steps;
        }
    }

    pub fn contract(&self) -> gmwb::Result<ContractSpec> {
        Ok(ContractSpec {
            premium: self.premium,
            withdrawal_rate: self.withdrawal_rate,
            fee_rate: self.fee_rate,
            cdsc: gmwb::CdscSchedule::new(self.cdsc.clone())?,
        })
    }

    pub fn market(&self) -> MarketParams {
        MarketParams {
            rate: self.r,
            sigma: self.sigma,
            mu: self.mu,
        }
    }

    pub fn grid(&self) -> gmwb::Result<TimeGrid> {
        TimeGrid::new(self.engine.steps_per_year, 1.0 / self.withdrawal_rate)
    }

    pub fn sim(&self) -> gmwb::Result<SimSettings> {
        Ok(SimSettings::new(
            self.grid()?,
            self.engine.num_paths,
            self.engine.seed,
            self.engine.antithetic,
        ))
    }

    pub fn fit_sim(&self) -> gmwb::Result<SimSettings> {
        Ok(SimSettings::new(
            self.grid()?,
            self.lsmc.fit_paths,
            self.lsmc.fit_seed,
            false,
        ))
    }

    pub fn basis(&self) -> gmwb::BasisSpec {
        gmwb::BasisSpec {
            degree: self.lsmc.basis_degree,
            kink_feature: self.lsmc.kink_feature,
        }
    }
}
