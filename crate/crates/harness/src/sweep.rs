use std::time::Instant;

use rayon::prelude::*;
use riswpt_core::channel::{build_scenario, random_ris_phases, ScenarioConfig};
use riswpt_core::model::{compose_channel, received_powers, total_power};
use riswpt_core::oracle::{estimate_qmm, QmmOptions};
use riswpt_core::{ChannelSet, Error, PowerConstraints, Result, RisPhases, SolverConfig, TxBeamformer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Values are BS antenna counts `M`.
    Antennas,
    /// Values are fractions `gamma` of the max-min power required by every user.
    Gamma,
    /// Values are total RIS element counts `N`, split evenly over the two RISs.
    RisElements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    /// No RIS: only the direct links, beamformer optimized.
    Absent,
    /// RIS phases drawn uniformly at random and frozen, beamformer optimized.
    RandomFixed,
    /// Joint optimization of the beamformer and the RIS phases.
    Optimized,
}

fn default_num_seeds() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub ris_mode: RisMode,
    /// Seeds `scenario.seed .. scenario.seed + num_seeds`.
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Max-min estimation settings, used by gamma sweeps only.
    #[serde(default)]
    pub qmm: QmmOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep has no values".into()));
        }
        if self.num_seeds == 0 {
            return Err(Error::InvalidParameter("num_seeds must be positive".into()));
        }
        for &v in &self.values {
            let ok = match self.kind {
                SweepKind::Gamma => (0.0..=1.0).contains(&v),
                SweepKind::Antennas => v >= 1.0 && v.fract() == 0.0,
                SweepKind::RisElements => v >= 0.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!("invalid {:?} sweep value {v}", self.kind)));
            }
        }
        self.solver.validate()?;
        // every point of the sweep must describe a valid scenario
        for &v in &self.values {
            self.scenario_at(v, self.scenario.seed).validate()?;
        }
        Ok(())
    }

    fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.num_seeds as u64).map(|i| self.scenario.seed.wrapping_add(i))
    }

    /// Scenario of one sweep point. The RIS mode is applied separately.
    pub fn scenario_at(&self, value: f64, seed: u64) -> ScenarioConfig {
        let mut scenario = ScenarioConfig { seed, ..self.scenario.clone() };
        match self.kind {
            SweepKind::Antennas => scenario.antennas = value as usize,
            SweepKind::RisElements => {
                let n = value as usize;
                scenario.ris_elements = vec![n.div_ceil(2), n / 2];
            }
            SweepKind::Gamma => {}
        }
        if self.ris_mode == RisMode::Absent {
            scenario.ris_elements = vec![0; scenario.ris_elements.len()];
        }
        scenario
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub total_power_w: f64,
    pub min_user_power_w: f64,
    pub feasible: bool,
    pub outer_iters: usize,
    pub wall_time_s: f64,
}

/// A result row together with everything needed to re-check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub row: ResultRow,
    /// Scenario actually solved (RIS-less for the absent mode).
    pub scenario: ScenarioConfig,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub min_power: Vec<f64>,
    pub eta: f64,
    pub objective_trace: Vec<f64>,
    /// Why the run produced no solution, if it failed.
    pub error: Option<String>,
}

impl RunRecord {
    /// Per-user powers recomputed from the stored phases.
    pub fn recompute_powers(&self) -> Result<Vec<f64>> {
        let channels = build_scenario(&self.scenario)?;
        let h = compose_channel(&channels, &RisPhases::new(self.theta.clone())?)?;
        received_powers(&h, &TxBeamformer::new(self.alpha.clone(), self.scenario.tx_power_w)?, self.eta)
    }
}

struct Instance {
    scenario: ScenarioConfig,
    channels: ChannelSet,
    x0: TxBeamformer,
    ris0: RisPhases,
    solver: SolverConfig,
}

impl Instance {
    fn new(spec: &SweepSpec, value: f64, seed: u64) -> Result<Self> {
        let scenario = spec.scenario_at(value, seed);
        let channels = build_scenario(&scenario)?;
        let x0 = TxBeamformer::uniform(scenario.antennas, scenario.tx_power_w)?;
        // the optimized mode starts from the same random phases the
        // random-fixed mode keeps
        let ris0 = random_ris_phases(seed, scenario.total_elements());
        let solver = SolverConfig {
            optimize_ris: spec.ris_mode == RisMode::Optimized,
            ..spec.solver.clone()
        };
        Ok(Self { scenario, channels, x0, ris0, solver })
    }

    fn solve(&self, value: f64, constraints: &PowerConstraints, x0: &TxBeamformer, ris0: &RisPhases) -> RunRecord {
        let start = Instant::now();
        let outcome = riswpt_core::spmc_sca_admm(&self.channels, constraints, x0, ris0, &self.solver);
        let wall_time_s = start.elapsed().as_secs_f64();
        match outcome {
            Ok(result) => RunRecord {
                row: ResultRow {
                    sweep_value: value,
                    seed: self.scenario.seed,
                    total_power_w: result.total_power(),
                    min_user_power_w: result.min_user_power(),
                    feasible: result.all_feasible(),
                    outer_iters: result.outer_iters,
                    wall_time_s,
                },
                scenario: self.scenario.clone(),
                alpha: result.beamformer.alpha().to_vec(),
                theta: result.ris.theta().to_vec(),
                min_power: constraints.min_power().to_vec(),
                eta: constraints.eta(),
                objective_trace: result.objective_trace,
                error: None,
            },
            Err(e) => self.failed(value, constraints, x0, ris0, wall_time_s, e),
        }
    }

    /// Row of a run without a solution: reports the starting point, marked
    /// infeasible.
    fn failed(
        &self,
        value: f64,
        constraints: &PowerConstraints,
        x0: &TxBeamformer,
        ris0: &RisPhases,
        wall_time_s: f64,
        error: Error,
    ) -> RunRecord {
        let powers = compose_channel(&self.channels, ris0)
            .and_then(|h| received_powers(&h, x0, constraints.eta()))
            .unwrap_or_default();
        RunRecord {
            row: ResultRow {
                sweep_value: value,
                seed: self.scenario.seed,
                total_power_w: total_power(&powers),
                min_user_power_w: powers.iter().copied().reduce(f64::min).unwrap_or(0.0),
                feasible: false,
                outer_iters: 0,
                wall_time_s,
            },
            scenario: self.scenario.clone(),
            alpha: x0.alpha().to_vec(),
            theta: ris0.theta().to_vec(),
            min_power: constraints.min_power().to_vec(),
            eta: constraints.eta(),
            objective_trace: vec![total_power(&powers)],
            error: Some(error.to_string()),
        }
    }
}

/// All runs of one seed. Gamma sweeps share one max-min estimate per seed
/// and start every constrained solve from its witness.
fn run_seed(spec: &SweepSpec, seed: u64) -> Result<Vec<RunRecord>> {
    let users = spec.scenario.users;
    match spec.kind {
        SweepKind::Antennas | SweepKind::RisElements => spec
            .values
            .iter()
            .map(|&value| {
                let inst = Instance::new(spec, value, seed)?;
                Ok(inst.solve(value, &PowerConstraints::unconstrained(users), &inst.x0, &inst.ris0))
            })
            .collect(),
        SweepKind::Gamma => {
            let inst = Instance::new(spec, 0.0, seed)?;
            let qmm = estimate_qmm(&inst.channels, 1.0, &inst.x0, &inst.ris0, &inst.solver, &spec.qmm);
            spec.values
                .iter()
                .map(|&gamma| match &qmm {
                    Ok(est) => {
                        let constraints = PowerConstraints::uniform(users, gamma * est.level)?;
                        Ok(inst.solve(gamma, &constraints, &est.witness.beamformer, &est.witness.ris))
                    }
                    Err(e) => Ok(inst.failed(
                        gamma,
                        &PowerConstraints::unconstrained(users),
                        &inst.x0,
                        &inst.ris0,
                        0.0,
                        e.clone(),
                    )),
                })
                .collect()
        }
    }
}

/// One solve of the sweep point `(value, seed)` with explicit per-user
/// requirements, started from the sweep's default initial point. A start
/// that violates the requirements yields a row marked infeasible.
pub fn run_point(spec: &SweepSpec, value: f64, seed: u64, min_power: Vec<f64>) -> Result<RunRecord> {
    let inst = Instance::new(spec, value, seed)?;
    let constraints = PowerConstraints::new(min_power, 1.0)?;
    Ok(inst.solve(value, &constraints, &inst.x0, &inst.ris0))
}

/// Runs every (value, seed) pair of the sweep in parallel on the current
/// rayon pool. Output is sorted by sweep value, then seed.
pub fn run_sweep_detailed(spec: &SweepSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| run_seed(spec, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<RunRecord> = per_seed.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.row
            .sweep_value
            .total_cmp(&b.row.sweep_value)
            .then(a.row.seed.cmp(&b.row.seed))
    });
    Ok(records)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    Ok(run_sweep_detailed(spec)?.into_iter().map(|r| r.row).collect())
}

/// Mean of `field` over the rows with sweep value `value`.
pub fn mean_at(rows: &[ResultRow], value: f64, field: impl Fn(&ResultRow) -> f64) -> f64 {
    let selected: Vec<f64> = rows.iter().filter(|r| r.sweep_value == value).map(field).collect();
    selected.iter().sum::<f64>() / selected.len() as f64
}
