//! Brute-force references for validating the solver on small instances,
//! and the max-min power estimate used to set minimum-power requirements.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    compose_channel, CMatrix, CVector, ChannelSet, PowerConstraints, RisPhases, TxBeamformer,
};
use crate::solver::{spmc_sca_admm, SolveResult, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Every phase takes one of `phase_levels` uniformly spaced values in
    /// `[-pi, pi)`.
    pub phase_levels: usize,
    /// Refuse grids with more points than this.
    pub max_enumeration: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            phase_levels: 16,
            max_enumeration: 1 << 24,
        }
    }
}

impl GridSpec {
    /// Grid sizes `(ris_points, tx_points)` for `m` antennas and `n` elements,
    /// refusing grids over the cap.
    fn sizes(&self, m: usize, n: usize) -> Result<(u128, u128)> {
        if self.phase_levels < 2 {
            return Err(Error::InvalidParameter("phase_levels must be at least 2".into()));
        }
        let levels = self.phase_levels as u128;
        let count = |d: usize| (0..d).try_fold(1u128, |acc, _| acc.checked_mul(levels));
        match (count(m + n), count(n), count(m)) {
            (Some(total), Some(ris), Some(tx)) if total <= u128::from(self.max_enumeration) => Ok((ris, tx)),
            (total, _, _) => Err(Error::GridTooLarge {
                points: total.unwrap_or(u128::MAX),
                cap: u128::from(self.max_enumeration),
            }),
        }
    }

    fn level(&self, index: usize) -> f64 {
        -PI + TAU * index as f64 / self.phase_levels as f64
    }

    fn digits(&self, mut index: u128, out: &mut [f64]) {
        let base = self.phase_levels as u128;
        for slot in out.iter_mut() {
            *slot = self.level((index % base) as usize);
            index /= base;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub objective: f64,
    pub powers: Vec<f64>,
    /// False when no grid point meets every requirement; the point returned
    /// then minimizes the largest shortfall.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feasible: bool,
    /// Objective when feasible, minus the largest shortfall otherwise.
    score: f64,
    theta_index: u128,
    alpha_index: u128,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        if self.feasible != other.feasible {
            return self.feasible;
        }
        if self.score != other.score {
            return self.score > other.score;
        }
        (self.theta_index, self.alpha_index) < (other.theta_index, other.alpha_index)
    }

    fn pick(a: Candidate, b: Candidate) -> Candidate {
        if b.better_than(&a) {
            b
        } else {
            a
        }
    }
}

/// Exhaustive search over quantized transmit and RIS phases.
///
/// Requirements are checked with zero tolerance.
pub fn grid_search(
    channels: &ChannelSet,
    constraints: &PowerConstraints,
    power: f64,
    spec: &GridSpec,
) -> Result<GridResult> {
    if constraints.num_users() != channels.num_users() {
        return Err(Error::Dimension(format!(
            "{} power constraints for {} users",
            constraints.num_users(),
            channels.num_users()
        )));
    }
    let m = channels.num_antennas();
    let n = channels.num_elements();
    let (ris_points, tx_points) = spec.sizes(m, n)?;
    let amplitude = (power / m as f64).sqrt();
    let eta = constraints.eta();
    let required = constraints.min_power();

    let best = (0..ris_points)
        .into_par_iter()
        .map(|theta_index| -> Result<Candidate> {
            let mut theta = vec![0.0; n];
            spec.digits(theta_index, &mut theta);
            let h = compose_channel(channels, &RisPhases::new(theta)?)?;
            let mut alpha = vec![0.0; m];
            let mut best: Option<Candidate> = None;
            for alpha_index in 0..tx_points {
                spec.digits(alpha_index, &mut alpha);
                let x: Vec<Complex64> =
                    alpha.iter().map(|&a| Complex64::from_polar(amplitude, a)).collect();
                let mut total = 0.0;
                let mut shortfall = f64::NEG_INFINITY;
                for (k, row) in h.row_iter().enumerate() {
                    let y: Complex64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                    let q = eta * y.norm_sqr();
                    total += q;
                    shortfall = shortfall.max(required[k] - q);
                }
                let feasible = shortfall <= 0.0;
                let candidate = Candidate {
                    feasible,
                    score: if feasible { total } else { -shortfall },
                    theta_index,
                    alpha_index,
                };
                best = Some(match best {
                    Some(b) => Candidate::pick(b, candidate),
                    None => candidate,
                });
            }
            Ok(best.expect("at least one transmit grid point"))
        })
        .try_reduce_with(|a, b| Ok(Candidate::pick(a, b)))
        .expect("at least one RIS grid point")?;

    let mut alpha = vec![0.0; m];
    let mut theta = vec![0.0; n];
    spec.digits(best.alpha_index, &mut alpha);
    spec.digits(best.theta_index, &mut theta);
    let beamformer = TxBeamformer::new(alpha, power)?;
    let ris = RisPhases::new(theta)?;
    let h = compose_channel(channels, &ris)?;
    let powers = crate::model::received_powers(&h, &beamformer, eta)?;
    Ok(GridResult {
        alpha: beamformer.alpha().to_vec(),
        theta: ris.theta().to_vec(),
        objective: powers.iter().sum(),
        powers,
        feasible: best.feasible,
    })
}

/// Largest uniform per-user requirement found feasible, with a point that
/// achieves it.
#[derive(Debug, Clone, PartialEq)]
pub struct QmmEstimate {
    /// `min_k Q_k` of the witness.
    pub level: f64,
    pub witness: SolveResult,
    /// Number of bisection levels tried, including the unconstrained solve.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmmOptions {
    /// Relative width of the final bracket.
    pub bisect_tol: f64,
    /// Random starting points tried at a level after the warm starts fail.
    pub restarts: usize,
    /// Multiplies both penalties during the constrained trials, trading
    /// objective progress for faster consensus with the feasible locals.
    pub penalty_scale: f64,
    pub restart_seed: u64,
}

impl Default for QmmOptions {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-2,
            restarts: 2,
            penalty_scale: 100.0,
            restart_seed: 0,
        }
    }
}

/// Heuristic lower bound on `max_{x, Psi} min_k Q_k`.
///
/// Starts from an unconstrained solve, whose smallest user power is feasible
/// by construction. The bracket starts at its largest user power and doubles
/// while requirements at that level remain attainable, then bisects until
/// the bracket is within `bisect_tol` relative.
///
/// A level counts as attainable when the solver, run with the uniform
/// requirement, ends at a point meeting it. Each level is tried from the best
/// witness, then from the least-violating point of the last failed level,
/// then from `restarts` random phase configurations.
pub fn estimate_qmm(
    channels: &ChannelSet,
    eta: f64,
    x0: &TxBeamformer,
    ris0: &RisPhases,
    config: &SolverConfig,
    options: &QmmOptions,
) -> Result<QmmEstimate> {
    let bisect_tol = options.bisect_tol;
    if !(bisect_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("bisect_tol must be positive, got {bisect_tol}")));
    }
    if !(options.penalty_scale > 0.0 && options.penalty_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "penalty_scale must be positive, got {}",
            options.penalty_scale
        )));
    }
    let users = channels.num_users();
    let unconstrained = PowerConstraints::new(vec![0.0; users], eta)?;
    let mut witness = spmc_sca_admm(channels, &unconstrained, x0, ris0, config)?;
    let mut lo = witness.min_user_power();
    let mut hi = witness.per_user_power.iter().copied().fold(0.0, f64::max);
    let mut trials = 1;
    if hi <= lo {
        return Ok(QmmEstimate { level: lo, witness, trials });
    }

    let trial_config = SolverConfig {
        allow_infeasible_start: true,
        rho_x: config.rho_x * options.penalty_scale,
        rho_psi: config.rho_psi * options.penalty_scale,
        ..config.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.restart_seed);
    let mut frontier: Option<SolveResult> = None;

    // Some(result) when `level` is attained; otherwise updates the frontier.
    let mut attempt = |level: f64, witness: &SolveResult, frontier: &mut Option<SolveResult>| -> Result<Option<SolveResult>> {
        let constraints = PowerConstraints::new(vec![level; users], eta)?;
        let random = (0..options.restarts).map(|_| {
            let alpha = (0..x0.num_antennas()).map(|_| rng.gen_range(-PI..PI)).collect();
            let theta = (0..ris0.len()).map(|_| rng.gen_range(-PI..PI)).collect();
            Ok::<_, Error>((TxBeamformer::new(alpha, x0.power())?, RisPhases::new(theta)?))
        });
        let warm = std::iter::once(witness)
            .chain(frontier.as_ref())
            .map(|r| Ok((r.beamformer.clone(), r.ris.clone())))
            .collect::<Vec<_>>();
        let mut closest: Option<SolveResult> = None;
        for start in warm.into_iter().chain(random) {
            let (x, ris) = start?;
            match spmc_sca_admm(channels, &constraints, &x, &ris, &trial_config) {
                Ok(result) if result.min_user_power() >= level => return Ok(Some(result)),
                Ok(result) => {
                    if closest.as_ref().is_none_or(|c| result.min_user_power() > c.min_user_power()) {
                        closest = Some(result);
                    }
                }
                Err(Error::InfeasibleConstraint { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if closest.is_some() {
            *frontier = closest;
        }
        Ok(None)
    };

    for _ in 0..64 {
        trials += 1;
        match attempt(hi, &witness, &mut frontier)? {
            Some(result) => {
                lo = result.min_user_power();
                witness = result;
                hi = 2.0 * hi.max(lo);
            }
            None => break,
        }
    }

    while hi - lo > bisect_tol * hi {
        let mid = 0.5 * (lo + hi);
        trials += 1;
        match attempt(mid, &witness, &mut frontier)? {
            Some(result) => {
                lo = result.min_user_power();
                witness = result;
                hi = hi.max(lo);
            }
            None => hi = mid,
        }
    }

    Ok(QmmEstimate {
        level: witness.min_user_power(),
        witness,
        trials,
    })
}

/// Smallest distance from `z` to randomly sampled points with
/// `|h^H e| = sqrt(p)`. Returns zero when `z` already satisfies the
/// requirement.
///
/// Samples pick a random target phase, land on the corresponding affine
/// boundary and, for every other sample, add a random component orthogonal
/// to `h`.
pub fn projection_oracle<R: Rng + ?Sized>(
    z: &CVector,
    h: &CVector,
    p: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let inner = h.dotc(z);
    if inner.norm_sqr() >= p {
        return 0.0;
    }
    let h_norm_sq = h.norm_squared();
    let target = p.sqrt();
    let mut best = f64::INFINITY;
    for i in 0..samples.max(1) {
        let nu: f64 = rng.gen_range(-PI..PI);
        let coeff = (Complex64::from_polar(target, nu) - inner) / h_norm_sq;
        let mut step = h * coeff;
        if i % 2 == 1 {
            let mut w = CVector::from_fn(z.len(), |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let along = h.dotc(&w) / h_norm_sq;
            w -= h * along;
            let w_norm = w.norm();
            if w_norm > 0.0 {
                let scale: f64 = rng.gen_range(0.0..1.0) * step.norm() / w_norm;
                step += w * Complex64::from(scale);
            }
        }
        best = best.min(step.norm());
    }
    best
}

/// `min_k |h_k^H x|^2` over a phase grid, used by tests that compare the
/// max-min estimate with enumeration.
pub fn grid_max_min(channels: &ChannelSet, power: f64, spec: &GridSpec) -> Result<f64> {
    let m = channels.num_antennas();
    let n = channels.num_elements();
    let (ris_points, tx_points) = spec.sizes(m, n)?;
    let amplitude = (power / m as f64).sqrt();
    let best = (0..ris_points)
        .into_par_iter()
        .map(|theta_index| -> Result<f64> {
            let mut theta = vec![0.0; n];
            spec.digits(theta_index, &mut theta);
            let h: CMatrix = compose_channel(channels, &RisPhases::new(theta)?)?;
            let mut alpha = vec![0.0; m];
            let mut best = 0.0f64;
            for alpha_index in 0..tx_points {
                spec.digits(alpha_index, &mut alpha);
                let x: Vec<Complex64> =
                    alpha.iter().map(|&a| Complex64::from_polar(amplitude, a)).collect();
                let worst = h
                    .row_iter()
                    .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr())
                    .fold(f64::INFINITY, f64::min);
                best = best.max(worst);
            }
            Ok(best)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(best)
}
