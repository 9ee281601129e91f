//! Alternating SCA/ADMM optimization of the transmit phases and the RIS phases.
//!
//! Each outer iteration linearizes the objective once per block and solves the
//! linearized problem with consensus ADMM:
//!
//! ```text
//!   max_x  Re{w_hat^H x}
//!   s.t.   |h_k^H e_k|^2 >= p_k,   e_k = x,   |x_m| = const
//! ```
//!
//! The global update is a per-entry phase alignment, the local updates are
//! closed-form projections onto `{e : |h^H e| >= sqrt(p)}` and the scaled
//! duals accumulate the consensus residuals. The same machinery solves the
//! RIS block on the lifted vector `b = [t*v; t]`.
//!
//! The penalty parameters in [`SolverConfig`] are dimensionless. The
//! effective penalty of each inner run is `rho * ||w_hat|| / (K * ||x_hat||)`
//! so that the iterates do not depend on the absolute scale of the channels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_ris_quadratic, check_feasibility, compose_channel, phase_of, received_powers,
    total_power, CMatrix, CVector, ChannelSet, PowerConstraints, RisPhases, RisQuadratic,
    TxBeamformer, DEFAULT_FEASIBILITY_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Penalty of the transmit-beamformer block (dimensionless).
    pub rho_x: f64,
    /// Penalty of the RIS block (dimensionless).
    pub rho_psi: f64,
    /// Stop once the fractional objective increase of an outer iteration
    /// falls below this value.
    pub epsilon: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub feasibility_tol: f64,
    /// Inner ADMM stops when the primal and dual residuals both drop below
    /// `inner_stop_tol * sqrt(len) * |entry|`, where `|entry|` is the common
    /// modulus of the global variable.
    pub inner_stop_tol: f64,
    /// Carry the local and dual variables of each block across outer
    /// iterations instead of re-initializing them.
    pub warm_start: bool,
    /// When false the RIS phases stay at their initial values.
    pub optimize_ris: bool,
    /// Accept an initial point that violates the minimum-power constraints.
    /// The solver then first reduces the total shortfall and only ranks
    /// iterates by objective once a feasible one is found.
    pub allow_infeasible_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_x: 1.0,
            rho_psi: 1.0,
            epsilon: 1e-4,
            max_outer: 100,
            max_inner: 500,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            inner_stop_tol: 1e-6,
            warm_start: false,
            optimize_ris: true,
            allow_infeasible_start: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_x", self.rho_x),
            ("rho_psi", self.rho_psi),
            ("epsilon", self.epsilon),
            ("inner_stop_tol", self.inner_stop_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter(
                "max_outer and max_inner must be at least 1".into(),
            ));
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "feasibility_tol must be non-negative, got {}",
                self.feasibility_tol
            )));
        }
        Ok(())
    }
}

/// ADMM state of one block: the global variable, one local copy and one
/// scaled dual per user, and the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmWorkspace {
    pub global: CVector,
    pub locals: Vec<CVector>,
    pub duals: Vec<CVector>,
    pub rho: f64,
}

impl AdmmWorkspace {
    /// Locals start at `init`, duals at zero.
    pub fn new(init: CVector, users: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty must be positive, got {rho}")));
        }
        let zeros = CVector::zeros(init.len());
        Ok(Self {
            locals: vec![init.clone(); users],
            duals: vec![zeros; users],
            global: init,
            rho,
        })
    }

    /// `max_k ||e_k - global||`.
    pub fn primal_residual(&self) -> f64 {
        self.locals
            .iter()
            .map(|e| (e - &self.global).norm())
            .fold(0.0, f64::max)
    }

    fn consensus_pull(&self) -> CVector {
        let mut acc = CVector::zeros(self.global.len());
        for (u, e) in self.duals.iter().zip(&self.locals) {
            acc += u;
            acc += e;
        }
        acc
    }
}

/// Entry-wise `amplitude * exp(j*arg(w))` with `arg(0) = 0`.
fn align_phases(w: &CVector, amplitude: f64) -> CVector {
    w.map(|z| Complex64::from_polar(amplitude, phase_of(z)))
}

/// Global update shared by both blocks: maximizes `Re{w^H x}` over vectors
/// with entries of modulus `amplitude`, where
/// `w = linear + 2 rho sum_k (u_k + e_k)`.
pub fn constant_envelope_step(linear: &CVector, workspace: &AdmmWorkspace, amplitude: f64) -> CVector {
    let w = linear + workspace.consensus_pull() * Complex64::from(2.0 * workspace.rho);
    align_phases(&w, amplitude)
}

/// Beamformer update: `sqrt(P/M) exp(j arg(H^H H x_hat + 2 rho sum_k (u_k + e_k)))`.
pub fn update_x(h: &CMatrix, x_hat: &CVector, workspace: &AdmmWorkspace, power: f64) -> CVector {
    let linear = h.adjoint() * (h * x_hat);
    let amplitude = (power / x_hat.len() as f64).sqrt();
    constant_envelope_step(&linear, workspace, amplitude)
}

/// Lifted RIS update: `exp(j arg(L b_hat + 2 rho sum_k (u_k + e_k)))`.
pub fn update_b(gram: &CMatrix, b_hat: &CVector, workspace: &AdmmWorkspace) -> CVector {
    constant_envelope_step(&(gram * b_hat), workspace, 1.0)
}

/// Euclidean projection of `z` onto `{e : |h^H e|^2 >= p}`.
///
/// When `h^H z = 0` every boundary point `h^H e = sqrt(p) e^{j nu}` is
/// equally close; `nu = 0` is used.
pub fn project_min_power(z: &CVector, h: &CVector, p: f64) -> Result<CVector> {
    let inner = h.dotc(z);
    let magnitude = inner.norm();
    if magnitude * magnitude >= p {
        return Ok(z.clone());
    }
    let h_norm_sq = h.norm_squared();
    if h_norm_sq == 0.0 {
        return Err(Error::InfeasibleConstraint { user: 0, required: p });
    }
    let target = p.sqrt();
    let coeff = if magnitude == 0.0 {
        Complex64::from(target / h_norm_sq)
    } else {
        inner * ((target - magnitude) / (h_norm_sq * magnitude))
    };
    Ok(z + h * coeff)
}

/// `u_k <- u_k + e_k - global`.
pub fn update_duals(workspace: &mut AdmmWorkspace) {
    let AdmmWorkspace {
        global,
        locals,
        duals,
        ..
    } = workspace;
    for (u, e) in duals.iter_mut().zip(locals.iter()) {
        *u += e - &*global;
    }
}

/// Result of one inner ADMM run.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub solution: CVector,
    pub iterations: usize,
    pub converged: bool,
}

/// One linearized block: maximize `Re{linear^H x}` subject to
/// `|h_k^H x|^2 >= required_k` and `|x_i| = amplitude`.
struct ConsensusBlock<'a> {
    linear: CVector,
    constraint_vectors: &'a [CVector],
    required: &'a [f64],
    amplitude: f64,
}

impl ConsensusBlock<'_> {
    fn effective_rho(&self, rho: f64, expansion: &CVector) -> f64 {
        let users = self.constraint_vectors.len().max(1) as f64;
        let scale = self.linear.norm() / (users * expansion.norm());
        if scale > 0.0 && scale.is_finite() {
            rho * scale
        } else {
            rho
        }
    }

    fn workspace(
        &self,
        init: &CVector,
        rho: f64,
        carry: Option<AdmmWorkspace>,
    ) -> Result<AdmmWorkspace> {
        let rho = self.effective_rho(rho, init);
        match carry {
            Some(mut ws) if ws.global.len() == init.len() && ws.locals.len() == self.required.len() => {
                ws.global = init.clone();
                ws.rho = rho;
                Ok(ws)
            }
            _ => AdmmWorkspace::new(init.clone(), self.required.len(), rho),
        }
    }

    fn run(&self, ws: &mut AdmmWorkspace, max_inner: usize, stop_tol: f64) -> Result<BlockOutcome> {
        let threshold = stop_tol * (ws.global.len() as f64).sqrt() * self.amplitude;
        for iteration in 1..=max_inner {
            let next = constant_envelope_step(&self.linear, ws, self.amplitude);
            let previous = std::mem::replace(&mut ws.global, next);

            for (k, (h, &p)) in self.constraint_vectors.iter().zip(self.required).enumerate() {
                let target = &ws.global - &ws.duals[k];
                ws.locals[k] = project_min_power(&target, h, p).map_err(|e| match e {
                    Error::InfeasibleConstraint { required, .. } => {
                        Error::InfeasibleConstraint { user: k, required }
                    }
                    other => other,
                })?;
            }
            update_duals(ws);

            let dual = (&ws.global - &previous).norm();
            if ws.primal_residual() < threshold && dual < threshold {
                return Ok(BlockOutcome {
                    solution: ws.global.clone(),
                    iterations: iteration,
                    converged: true,
                });
            }
        }
        Ok(BlockOutcome {
            solution: ws.global.clone(),
            iterations: max_inner,
            converged: false,
        })
    }
}

fn channel_requirements(constraints: &PowerConstraints) -> Result<Vec<f64>> {
    (0..constraints.num_users())
        .map(|k| constraints.channel_requirement(k))
        .collect()
}

fn check_users(constraints: &PowerConstraints, users: usize) -> Result<()> {
    if constraints.num_users() != users {
        return Err(Error::Dimension(format!(
            "{} power constraints for {users} users",
            constraints.num_users()
        )));
    }
    Ok(())
}

/// Inner ADMM for the beamformer with the SCA expansion point fixed at
/// `x_init`.
pub fn admm_x_block(
    h: &CMatrix,
    x_init: &TxBeamformer,
    constraints: &PowerConstraints,
    config: &SolverConfig,
) -> Result<BlockOutcome> {
    let mut carry = None;
    x_block(h, x_init, constraints, config, &mut carry)
}

fn x_block(
    h: &CMatrix,
    x_init: &TxBeamformer,
    constraints: &PowerConstraints,
    config: &SolverConfig,
    carry: &mut Option<AdmmWorkspace>,
) -> Result<BlockOutcome> {
    check_users(constraints, h.nrows())?;
    if h.ncols() != x_init.num_antennas() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, beamformer {} antennas",
            h.ncols(),
            x_init.num_antennas()
        )));
    }
    let x_hat = x_init.vector();
    let required = channel_requirements(constraints)?;
    let rows: Vec<CVector> = h.row_iter().map(|r| r.adjoint()).collect();
    let block = ConsensusBlock {
        linear: h.adjoint() * (h * &x_hat),
        constraint_vectors: &rows,
        required: &required,
        amplitude: x_init.amplitude(),
    };
    let mut ws = block.workspace(&x_hat, config.rho_x, carry.take())?;
    let outcome = block.run(&mut ws, config.max_inner, config.inner_stop_tol)?;
    if config.warm_start {
        *carry = Some(ws);
    }
    Ok(outcome)
}

/// Inner ADMM for the lifted RIS vector `b` with the SCA expansion point
/// fixed at `b_init`.
pub fn admm_psi_block(
    quadratic: &RisQuadratic,
    b_init: &CVector,
    constraints: &PowerConstraints,
    config: &SolverConfig,
) -> Result<BlockOutcome> {
    let mut carry = None;
    psi_block(quadratic, b_init, constraints, config, &mut carry)
}

fn psi_block(
    quadratic: &RisQuadratic,
    b_init: &CVector,
    constraints: &PowerConstraints,
    config: &SolverConfig,
    carry: &mut Option<AdmmWorkspace>,
) -> Result<BlockOutcome> {
    check_users(constraints, quadratic.l.len())?;
    if quadratic.gram.nrows() != b_init.len() {
        return Err(Error::Dimension(format!(
            "lifted vector has {} entries, quadratic form {}",
            b_init.len(),
            quadratic.gram.nrows()
        )));
    }
    let required = channel_requirements(constraints)?;
    let block = ConsensusBlock {
        linear: &quadratic.gram * b_init,
        constraint_vectors: &quadratic.l,
        required: &required,
        amplitude: 1.0,
    };
    let mut ws = block.workspace(b_init, config.rho_psi, carry.take())?;
    let outcome = block.run(&mut ws, config.max_inner, config.inner_stop_tol)?;
    if config.warm_start {
        *carry = Some(ws);
    }
    Ok(outcome)
}

/// `v = b[..N] / b[N]`, `theta_n = -arg(v_n)`.
pub fn recover_ris_phases(b: &CVector) -> RisPhases {
    let n = b.len().saturating_sub(1);
    let t = b[n];
    let theta = (0..n).map(|i| -phase_of(b[i] / t)).collect();
    RisPhases::new(theta).expect("phases of finite unit-modulus entries are finite")
}

/// `[v; 1]` for the current RIS phases.
pub fn lift_ris_phases(ris: &RisPhases) -> CVector {
    ris.v().push(Complex64::new(1.0, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Total received power of the incumbent: entry 0 is the starting point,
    /// then one entry per outer iteration.
    pub objective_trace: Vec<f64>,
    pub per_user_power: Vec<f64>,
    pub feasible: Vec<bool>,
    pub outer_iters: usize,
    pub inner_iters_x: usize,
    pub inner_iters_psi: usize,
    pub beamformer: TxBeamformer,
    pub ris: RisPhases,
}

impl SolveResult {
    pub fn total_power(&self) -> f64 {
        total_power(&self.per_user_power)
    }

    pub fn min_user_power(&self) -> f64 {
        self.per_user_power.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|f| *f)
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    beamformer: TxBeamformer,
    ris: RisPhases,
    powers: Vec<f64>,
    objective: f64,
    violation: f64,
    feasible: bool,
}

impl Iterate {
    fn evaluate(
        channels: &ChannelSet,
        constraints: &PowerConstraints,
        beamformer: TxBeamformer,
        ris: RisPhases,
        tol: f64,
    ) -> Result<Self> {
        let h = compose_channel(channels, &ris)?;
        let powers = received_powers(&h, &beamformer, constraints.eta())?;
        let feasible = check_feasibility(&powers, constraints, tol).iter().all(|f| *f);
        Ok(Self {
            objective: total_power(&powers),
            violation: constraints.violation(&powers),
            feasible,
            beamformer,
            ris,
            powers,
        })
    }

    /// Safeguard ordering: feasible beats infeasible, feasible iterates are
    /// ranked by objective, infeasible ones by total shortfall.
    fn improves_on(&self, incumbent: &Iterate) -> bool {
        match (self.feasible, incumbent.feasible) {
            (true, true) => self.objective >= incumbent.objective,
            (true, false) => true,
            (false, true) => false,
            (false, false) => {
                self.violation < incumbent.violation
                    || (self.violation == incumbent.violation && self.objective >= incumbent.objective)
            }
        }
    }
}

/// Joint optimization of the transmit phases and the RIS phases.
///
/// Alternates one SCA-linearized ADMM solve for the beamformer with one for
/// the RIS phases. A block result replaces the incumbent only if it is at
/// least as good under the safeguard ordering, so the recorded objective is
/// non-decreasing whenever the starting point is feasible.
pub fn spmc_sca_admm(
    channels: &ChannelSet,
    constraints: &PowerConstraints,
    x0: &TxBeamformer,
    ris0: &RisPhases,
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    check_users(constraints, channels.num_users())?;
    if x0.num_antennas() != channels.num_antennas() {
        return Err(Error::Dimension(format!(
            "initial beamformer has {} antennas, channels {}",
            x0.num_antennas(),
            channels.num_antennas()
        )));
    }
    let tol = config.feasibility_tol;
    let power = x0.power();

    let mut incumbent = Iterate::evaluate(channels, constraints, x0.clone(), ris0.clone(), tol)?;
    if !incumbent.feasible && !config.allow_infeasible_start {
        let users = check_feasibility(&incumbent.powers, constraints, tol)
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k)
            .collect();
        return Err(Error::InfeasibleStart { users });
    }

    let optimize_ris = config.optimize_ris && channels.num_elements() > 0;
    let mut trace = vec![incumbent.objective];
    let mut inner_x = 0;
    let mut inner_psi = 0;
    let mut outer = 0;
    let mut carry_x = None;
    let mut carry_psi = None;

    while outer < config.max_outer {
        outer += 1;
        let before = (incumbent.objective, incumbent.violation);

        let h = compose_channel(channels, &incumbent.ris)?;
        let outcome = x_block(&h, &incumbent.beamformer, constraints, config, &mut carry_x)?;
        inner_x += outcome.iterations;
        let candidate = Iterate::evaluate(
            channels,
            constraints,
            TxBeamformer::from_vector(&outcome.solution, power)?,
            incumbent.ris.clone(),
            tol,
        )?;
        if candidate.improves_on(&incumbent) {
            incumbent = candidate;
        }

        if optimize_ris {
            let quadratic = build_ris_quadratic(channels, &incumbent.beamformer)?;
            let b_hat = lift_ris_phases(&incumbent.ris);
            let outcome = psi_block(&quadratic, &b_hat, constraints, config, &mut carry_psi)?;
            inner_psi += outcome.iterations;
            let candidate = Iterate::evaluate(
                channels,
                constraints,
                incumbent.beamformer.clone(),
                recover_ris_phases(&outcome.solution),
                tol,
            )?;
            if candidate.improves_on(&incumbent) {
                incumbent = candidate;
            }
        }

        trace.push(incumbent.objective);

        let (old_objective, old_violation) = before;
        let objective_gain = if old_objective > 0.0 {
            (incumbent.objective - old_objective) / old_objective
        } else if incumbent.objective > old_objective {
            f64::INFINITY
        } else {
            0.0
        };
        let violation_gain = if old_violation > 0.0 {
            (old_violation - incumbent.violation) / old_violation
        } else {
            0.0
        };
        if objective_gain.max(violation_gain) < config.epsilon {
            break;
        }
    }

    let feasible = check_feasibility(&incumbent.powers, constraints, tol);
    Ok(SolveResult {
        objective_trace: trace,
        per_user_power: incumbent.powers,
        feasible,
        outer_iters: outer,
        inner_iters_x: inner_x,
        inner_iters_psi: inner_psi,
        beamformer: incumbent.beamformer,
        ris: incumbent.ris,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sca_bound_x;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_phases(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
    }

    fn constant_envelope(rng: &mut ChaCha8Rng, n: usize, amplitude: f64) -> CVector {
        CVector::from_iterator(n, random_phases(rng, n).into_iter().map(|a| Complex64::from_polar(amplitude, a)))
    }

    fn idle_workspace(len: usize, users: usize, rho: f64) -> AdmmWorkspace {
        AdmmWorkspace::new(CVector::zeros(len), users, rho).unwrap()
    }

    #[test]
    fn workspace_starts_in_consensus() {
        let init = CVector::from_element(3, c(0.0, 1.0));
        let ws = AdmmWorkspace::new(init.clone(), 4, 2.0).unwrap();
        assert_eq!(ws.locals, vec![init.clone(); 4]);
        assert!(ws.duals.iter().all(|u| u.norm() == 0.0));
        assert_eq!(ws.primal_residual(), 0.0);
        assert!(AdmmWorkspace::new(init, 1, 0.0).is_err());
    }

    #[test]
    fn update_x_argument_of_one_plus_j() {
        let h = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let x_hat = CVector::from_element(1, c(1.0, 1.0));
        let x = update_x(&h, &x_hat, &idle_workspace(1, 1, 1.0), 1.0);
        assert!((x[0] - Complex64::from_polar(1.0, FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn update_x_positive_real_gives_uniform_phases() {
        let h = CMatrix::identity(3, 3);
        let x_hat = CVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.0)]);
        let x = update_x(&h, &x_hat, &idle_workspace(3, 2, 1.0), 6.0);
        for z in x.iter() {
            assert!((z - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn update_x_zero_entry_gets_phase_zero() {
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let x_hat = CVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]);
        let x = update_x(&h, &x_hat, &idle_workspace(2, 1, 1.0), 2.0);
        assert_eq!(x[1], c(1.0, 0.0));
    }

    #[test]
    fn update_x_beats_random_constant_envelope_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (k, m, power) = (3, 5, 4.0);
        let amp = (power / m as f64).sqrt();
        let h = random_matrix(&mut rng, k, m);
        let x_hat = constant_envelope(&mut rng, m, amp);
        let mut ws = AdmmWorkspace::new(x_hat.clone(), k, 0.7).unwrap();
        for (e, u) in ws.locals.iter_mut().zip(ws.duals.iter_mut()) {
            *e = random_vector(&mut rng, m);
            *u = random_vector(&mut rng, m);
        }
        let x = update_x(&h, &x_hat, &ws, power);
        assert!(x.iter().all(|z| (z.norm() - amp).abs() < 1e-12));

        let mut w = h.adjoint() * (&h * &x_hat);
        for (e, u) in ws.locals.iter().zip(&ws.duals) {
            w += (e + u) * c(2.0 * ws.rho, 0.0);
        }
        let best = w.dotc(&x).re;
        for _ in 0..10_000 {
            let cand = constant_envelope(&mut rng, m, amp);
            assert!(w.dotc(&cand).re <= best + 1e-12);
        }
    }

    #[test]
    fn projection_one_dimensional_example() {
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let z = CVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.0)]);
        let e = project_min_power(&z, &h, 1.0).unwrap();
        assert!((e - CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).norm() < 1e-15);
    }

    #[test]
    fn projection_keeps_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = random_vector(&mut rng, 4);
        let z = random_vector(&mut rng, 4);
        let p = 0.9 * h.dotc(&z).norm_sqr();
        assert_eq!(project_min_power(&z, &h, p).unwrap(), z);
        assert_eq!(project_min_power(&z, &h, 0.0).unwrap(), z);
    }

    #[test]
    fn projection_degenerate_phase_uses_zero() {
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let z = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let e = project_min_power(&z, &h, 1.0).unwrap();
        assert!((e - CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).norm() < 1e-15);
    }

    #[test]
    fn projection_with_zero_channel_is_infeasible() {
        let z = CVector::from_element(2, c(1.0, 0.0));
        let h = CVector::zeros(2);
        assert!(matches!(project_min_power(&z, &h, 1.0), Err(Error::InfeasibleConstraint { .. })));
        assert_eq!(project_min_power(&z, &h, 0.0).unwrap(), z);
    }

    #[test]
    fn projection_is_nearest_boundary_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_vector(&mut rng, 3);
        let z = random_vector(&mut rng, 3) * c(0.05, 0.0);
        let p = 4.0;
        assert!(h.dotc(&z).norm_sqr() < p);
        let e = project_min_power(&z, &h, p).unwrap();
        assert!((h.dotc(&e).norm() - p.sqrt()).abs() < 1e-10);
        let closest = (&e - &z).norm();
        let h_norm_sq = h.norm_squared();
        for _ in 0..100_000 {
            // arbitrary feasible point: scale a random vector onto or past the boundary
            let s = random_vector(&mut rng, 3);
            let gain = h.dotc(&s).norm();
            let s = &s * c(p.sqrt() / gain * rng.gen_range(1.0..1.5), 0.0);
            assert!(h.dotc(&s).norm_sqr() >= p * (1.0 - 1e-12));
            assert!(closest <= (&s - &z).norm() + 1e-9, "{h_norm_sq}");
        }
    }

    #[test]
    fn dual_update_examples() {
        let global = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let mut ws = AdmmWorkspace::new(global.clone(), 2, 1.0).unwrap();
        update_duals(&mut ws);
        assert!(ws.duals.iter().all(|u| u.norm() == 0.0));

        let d = CVector::from_vec(vec![c(0.25, -0.5), c(1.0, 0.0)]);
        ws.locals = vec![&global + &d; 2];
        update_duals(&mut ws);
        assert!(ws.duals.iter().all(|u| (u - &d).norm() < 1e-15));

        ws.locals = vec![global.clone(); 2];
        let before = ws.duals.clone();
        update_duals(&mut ws);
        assert_eq!(ws.duals, before);
        assert_eq!(ws.primal_residual(), 0.0);
    }

    #[test]
    fn x_block_single_user_unconstrained_aligns_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let h = random_matrix(&mut rng, 1, 4);
        let x0 = TxBeamformer::new(random_phases(&mut rng, 4), 2.0).unwrap();
        let out = admm_x_block(&h, &x0, &PowerConstraints::unconstrained(1), &SolverConfig::default()).unwrap();
        assert!(out.converged);
        let target = align_phases(&(h.adjoint() * (&h * x0.vector())), x0.amplitude());
        assert!((out.solution - target).norm() < 1e-5);
    }

    #[test]
    fn x_block_unconstrained_improves_linearization() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..20 {
            let h = random_matrix(&mut rng, 4, 6);
            let x0 = TxBeamformer::new(random_phases(&mut rng, 6), 3.0).unwrap();
            let x_hat = x0.vector();
            let out = admm_x_block(&h, &x0, &PowerConstraints::unconstrained(4), &SolverConfig::default()).unwrap();
            assert!(out.solution.iter().all(|z| (z.norm() - x0.amplitude()).abs() < 1e-12));
            assert!(sca_bound_x(&h, &x_hat, &out.solution) >= sca_bound_x(&h, &x_hat, &x_hat) - 1e-12);
            // unconstrained optimum of the linearization is the phase-aligned vector
            let direct = align_phases(&(h.adjoint() * (&h * &x_hat)), x0.amplitude());
            let reached = sca_bound_x(&h, &x_hat, &out.solution);
            let best = sca_bound_x(&h, &x_hat, &direct);
            assert!(reached >= best * (1.0 - 1e-8), "{reached} vs {best}");
        }
    }

    #[test]
    fn x_block_binding_constraint_is_met() {
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.5, 0.0)]);
        let x0 = TxBeamformer::new(vec![0.0, PI], 2.0).unwrap();
        let constraints = PowerConstraints::new(vec![1.5], 1.0).unwrap();
        let out = admm_x_block(&h, &x0, &constraints, &SolverConfig::default()).unwrap();
        let q = (&h * &out.solution)[0].norm_sqr();
        assert!(q >= 1.5 - 1e-9, "{q}");
    }

    #[test]
    fn driver_keeps_feasibility_when_block_overshoots() {
        // objective favors user 0; the x block alone can starve user 1
        let h = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(3.0, 0.0), c(0.3, 0.0), c(-0.3, 0.0)]);
        let ch = ChannelSet::with_unit_amplitudes(h.clone(), CMatrix::zeros(2, 0), CMatrix::zeros(0, 2)).unwrap();
        let x0 = TxBeamformer::new(vec![0.0, 2.0], 2.0).unwrap();
        let p1 = 0.12;
        assert!((&h * x0.vector())[1].norm_sqr() >= p1);
        let constraints = PowerConstraints::new(vec![0.0, p1], 1.0).unwrap();
        let r = spmc_sca_admm(&ch, &constraints, &x0, &RisPhases::zeros(0), &SolverConfig::default()).unwrap();
        assert!(r.all_feasible());
        assert!(r.per_user_power[1] >= p1 - 1e-9);
        assert!(r.total_power() >= r.objective_trace[0]);
    }

    #[test]
    fn update_b_small_penalty_keeps_expansion_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let b_hat = constant_envelope(&mut rng, 5, 1.0);
        let ws = AdmmWorkspace::new(b_hat.clone(), 3, 1e-12).unwrap();
        let b = update_b(&CMatrix::identity(5, 5), &b_hat, &ws);
        assert!((b - b_hat).norm() < 1e-10);
    }

    #[test]
    fn update_b_positive_real_gives_ones() {
        let gram = CMatrix::from_element(3, 3, c(1.0, 0.0));
        let b_hat = CVector::from_element(3, c(1.0, 0.0));
        let b = update_b(&gram, &b_hat, &idle_workspace(3, 2, 1.0));
        assert!(b.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn update_b_beats_random_unit_modulus_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let a = random_matrix(&mut rng, 6, 6);
        let gram = &a * a.adjoint();
        let b_hat = constant_envelope(&mut rng, 6, 1.0);
        let mut ws = AdmmWorkspace::new(b_hat.clone(), 2, 0.3).unwrap();
        ws.duals[0] = random_vector(&mut rng, 6);
        let b = update_b(&gram, &b_hat, &ws);
        assert!(b.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let mut w = &gram * &b_hat;
        for (e, u) in ws.locals.iter().zip(&ws.duals) {
            w += (e + u) * c(2.0 * ws.rho, 0.0);
        }
        let best = w.dotc(&b).re;
        for _ in 0..10_000 {
            let cand = constant_envelope(&mut rng, 6, 1.0);
            assert!(w.dotc(&cand).re <= best + 1e-12);
        }
    }

    fn random_quadratic(rng: &mut ChaCha8Rng, k: usize, m: usize, n: usize) -> (ChannelSet, TxBeamformer, RisQuadratic) {
        let ch = ChannelSet::with_unit_amplitudes(
            random_matrix(rng, k, m),
            random_matrix(rng, k, n),
            random_matrix(rng, n, m),
        )
        .unwrap();
        let bf = TxBeamformer::new(random_phases(rng, m), 2.0).unwrap();
        let quad = build_ris_quadratic(&ch, &bf).unwrap();
        (ch, bf, quad)
    }

    #[test]
    fn psi_block_unconstrained_improves_linearization() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..20 {
            let (_, _, quad) = random_quadratic(&mut rng, 3, 4, 6);
            let b0 = lift_ris_phases(&RisPhases::new(random_phases(&mut rng, 6)).unwrap());
            let out = admm_psi_block(&quad, &b0, &PowerConstraints::unconstrained(3), &SolverConfig::default()).unwrap();
            assert!(out.solution.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let bound = |b: &CVector| (&quad.gram * &b0).dotc(b).re;
            assert!(bound(&out.solution) >= bound(&b0) - 1e-12);
        }
    }

    #[test]
    fn psi_block_without_ris_is_a_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (ch, bf, quad) = random_quadratic(&mut rng, 2, 3, 0);
        assert_eq!(quad.gram.shape(), (1, 1));
        let b0 = CVector::from_element(1, c(1.0, 0.0));
        let out = admm_psi_block(&quad, &b0, &PowerConstraints::unconstrained(2), &SolverConfig::default()).unwrap();
        assert_eq!(out.solution.len(), 1);
        assert!((out.solution[0].norm() - 1.0).abs() < 1e-12);
        let ris = recover_ris_phases(&out.solution);
        assert!(ris.is_empty());
        let before = received_powers(ch.direct(), &bf, 1.0).unwrap();
        let after = received_powers(&compose_channel(&ch, &ris).unwrap(), &bf, 1.0).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn psi_block_binding_constraint_is_met() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let (_, _, quad) = random_quadratic(&mut rng, 1, 3, 4);
        let b0 = lift_ris_phases(&RisPhases::new(random_phases(&mut rng, 4)).unwrap());
        let start = quad.value(&b0);
        // a requirement above the starting power but below the coherent maximum
        let max = quad.l[0].iter().map(|z| z.norm()).sum::<f64>().powi(2);
        let p = 0.5 * (start + max);
        let constraints = PowerConstraints::new(vec![p], 1.0).unwrap();
        let out = admm_psi_block(&quad, &b0, &constraints, &SolverConfig::default()).unwrap();
        assert!(quad.value(&out.solution) >= p - 1e-9);
    }

    #[test]
    fn recover_phases_examples() {
        let ris = recover_ris_phases(&CVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]));
        assert!((ris.theta()[0] + FRAC_PI_2).abs() < 1e-15);
        assert!((ris.v()[0] - c(0.0, 1.0)).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = constant_envelope(&mut rng, 5, 1.0);
        let rotated = &b * Complex64::from_polar(1.0, 1.234);
        let a = recover_ris_phases(&b);
        let r = recover_ris_phases(&rotated);
        for (x, y) in a.theta().iter().zip(r.theta()) {
            let diff = (x - y).abs();
            assert!(diff < 1e-12 || (diff - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn recovered_phases_reproduce_quadratic_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let (ch, bf, quad) = random_quadratic(&mut rng, 3, 4, 5);
            let b = constant_envelope(&mut rng, 6, 1.0);
            let ris = recover_ris_phases(&b);
            let h = compose_channel(&ch, &ris).unwrap();
            let total = total_power(&received_powers(&h, &bf, 1.0).unwrap());
            let via_gram = (b.adjoint() * &quad.gram * &b)[0].re;
            assert!((total - via_gram).abs() <= 1e-10 * total.max(1.0));
        }
    }

    #[test]
    fn single_user_without_ris_reaches_matched_phase_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h_d = random_matrix(&mut rng, 1, 5);
        let ch = ChannelSet::with_unit_amplitudes(h_d.clone(), CMatrix::zeros(1, 0), CMatrix::zeros(0, 5)).unwrap();
        let x0 = TxBeamformer::new(random_phases(&mut rng, 5), 3.0).unwrap();
        let result = spmc_sca_admm(&ch, &PowerConstraints::unconstrained(1), &x0, &RisPhases::zeros(0), &SolverConfig::default()).unwrap();
        let optimum = 3.0 / 5.0 * h_d.iter().map(|z| z.norm()).sum::<f64>().powi(2);
        assert!((result.total_power() - optimum).abs() <= 1e-6 * optimum);
    }

    #[test]
    fn trace_is_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..5 {
            let ch = ChannelSet::with_unit_amplitudes(
                random_matrix(&mut rng, 3, 4),
                random_matrix(&mut rng, 3, 6),
                random_matrix(&mut rng, 6, 4),
            )
            .unwrap();
            let x0 = TxBeamformer::new(random_phases(&mut rng, 4), 1.0).unwrap();
            let ris0 = RisPhases::new(random_phases(&mut rng, 6)).unwrap();
            let r = spmc_sca_admm(&ch, &PowerConstraints::unconstrained(3), &x0, &ris0, &SolverConfig::default()).unwrap();
            assert_eq!(r.objective_trace.len(), r.outer_iters + 1);
            for pair in r.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] * (1.0 - 1e-9));
            }
            assert!((r.objective_trace.last().unwrap() - r.total_power()).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let ch = ChannelSet::with_unit_amplitudes(h, CMatrix::zeros(1, 0), CMatrix::zeros(0, 2)).unwrap();
        let x0 = TxBeamformer::new(vec![0.0, PI], 2.0).unwrap();
        let constraints = PowerConstraints::new(vec![1.0], 1.0).unwrap();
        let err = spmc_sca_admm(&ch, &constraints, &x0, &RisPhases::zeros(0), &SolverConfig::default());
        assert_eq!(err.unwrap_err(), Error::InfeasibleStart { users: vec![0] });

        let relaxed = SolverConfig {
            allow_infeasible_start: true,
            ..SolverConfig::default()
        };
        let r = spmc_sca_admm(&ch, &constraints, &x0, &RisPhases::zeros(0), &relaxed).unwrap();
        assert!(r.all_feasible());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { rho_x: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_inner: 0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { feasibility_tol: -1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }
}
