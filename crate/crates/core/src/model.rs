//! Channel model, transmit/RIS parameterization and the received-power
//! objective.
//!
//! Conventions used throughout the crate:
//!
//! * `h_k^H` denotes row `k` of a `K x M` channel matrix, so the signal seen
//!   by user `k` is `sum_m H[k, m] * x[m]` with no conjugation.
//! * RIS phases are stored as angles `theta`. The reflection matrix is
//!   `Psi = diag(exp(j*theta))` and the phase-shift vector used by the RIS
//!   block is `v = exp(-j*theta)`, so `Psi = diag(conj(v))`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default absolute tolerance for minimum-power checks, in watts.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Maps an angle into `[-pi, pi)`.
pub fn canonical_phase(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

/// Argument of `z`, with `arg(0) = 0`.
pub fn phase_of(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        canonical_phase(z.arg())
    }
}

/// Static channels of one RIS-aided deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    direct: CMatrix,
    ris_user: CMatrix,
    bs_ris: CMatrix,
    amplitudes: Vec<f64>,
    cascade: CMatrix,
    sections: Vec<usize>,
}

impl ChannelSet {
    /// Builds a channel set from the direct channels `h_d` (`K x M`), the
    /// RIS-to-user channels `h_r` (`K x N`), the BS-to-RIS channels `s`
    /// (`N x M`) and the per-element reflection amplitudes. `sections` lists
    /// the element count of each RIS and must sum to `N`.
    pub fn new(
        h_d: CMatrix,
        h_r: CMatrix,
        s: CMatrix,
        amplitudes: Vec<f64>,
        sections: Vec<usize>,
    ) -> Result<Self> {
        let (k, m) = h_d.shape();
        let n = s.nrows();
        if k == 0 || m == 0 {
            return Err(Error::Dimension(format!(
                "direct channel must be non-empty, got {k}x{m}"
            )));
        }
        if h_r.shape() != (k, n) {
            return Err(Error::Dimension(format!(
                "RIS-user channel is {}x{}, expected {k}x{n}",
                h_r.nrows(),
                h_r.ncols()
            )));
        }
        if s.ncols() != m {
            return Err(Error::Dimension(format!(
                "BS-RIS channel has {} columns, expected {m}",
                s.ncols()
            )));
        }
        if amplitudes.len() != n {
            return Err(Error::Dimension(format!(
                "{} reflection amplitudes for {n} elements",
                amplitudes.len()
            )));
        }
        if let Some(bad) = amplitudes.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidParameter(format!(
                "reflection amplitude {bad} outside [0, 1]"
            )));
        }
        if sections.iter().sum::<usize>() != n {
            return Err(Error::Dimension(format!(
                "RIS sections {sections:?} do not sum to {n} elements"
            )));
        }

        let mut cascade = s.clone();
        for (mut row, &beta) in cascade.row_iter_mut().zip(&amplitudes) {
            row *= Complex64::from(beta);
        }

        Ok(Self {
            direct: h_d,
            ris_user: h_r,
            bs_ris: s,
            amplitudes,
            cascade,
            sections,
        })
    }

    /// Channel set with every reflection amplitude equal to one and a single
    /// RIS section.
    pub fn with_unit_amplitudes(h_d: CMatrix, h_r: CMatrix, s: CMatrix) -> Result<Self> {
        let n = s.nrows();
        Self::new(h_d, h_r, s, vec![1.0; n], vec![n])
    }

    pub fn num_users(&self) -> usize {
        self.direct.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.direct.ncols()
    }

    pub fn num_elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn direct(&self) -> &CMatrix {
        &self.direct
    }

    pub fn ris_user(&self) -> &CMatrix {
        &self.ris_user
    }

    pub fn bs_ris(&self) -> &CMatrix {
        &self.bs_ris
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// `G = diag(beta) * S`.
    pub fn cascade(&self) -> &CMatrix {
        &self.cascade
    }

    pub fn sections(&self) -> &[usize] {
        &self.sections
    }

    /// The same system with every end-to-end channel multiplied by the real
    /// factor `c` (the BS-RIS links are left as they are).
    pub fn scaled(&self, c: f64) -> Self {
        let c = Complex64::from(c);
        Self {
            direct: &self.direct * c,
            ris_user: &self.ris_user * c,
            bs_ris: self.bs_ris.clone(),
            amplitudes: self.amplitudes.clone(),
            cascade: self.cascade.clone(),
            sections: self.sections.clone(),
        }
    }
}

/// Constant-envelope transmit beamformer: `x_m = sqrt(P/M) * exp(j*alpha_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxBeamformer {
    alpha: Vec<f64>,
    power: f64,
}

impl TxBeamformer {
    pub fn new(alpha: Vec<f64>, power: f64) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Dimension("beamformer needs at least one antenna".into()));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "transmit power must be positive, got {power}"
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite antenna phase".into()));
        }
        Ok(Self {
            alpha: alpha.into_iter().map(canonical_phase).collect(),
            power,
        })
    }

    /// All antennas in phase.
    pub fn uniform(antennas: usize, power: f64) -> Result<Self> {
        Self::new(vec![0.0; antennas], power)
    }

    /// Keeps only the phases of `x`.
    pub fn from_vector(x: &CVector, power: f64) -> Result<Self> {
        Self::new(x.iter().map(|&z| phase_of(z)).collect(), power)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn num_antennas(&self) -> usize {
        self.alpha.len()
    }

    /// Per-antenna modulus `sqrt(P/M)`.
    pub fn amplitude(&self) -> f64 {
        (self.power / self.alpha.len() as f64).sqrt()
    }

    pub fn vector(&self) -> CVector {
        let amp = self.amplitude();
        CVector::from_iterator(
            self.alpha.len(),
            self.alpha.iter().map(|&a| Complex64::from_polar(amp, a)),
        )
    }
}

/// RIS phase shifts `theta_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    theta: Vec<f64>,
}

impl RisPhases {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite RIS phase".into()));
        }
        Ok(Self {
            theta: theta.into_iter().map(canonical_phase).collect(),
        })
    }

    pub fn zeros(elements: usize) -> Self {
        Self {
            theta: vec![0.0; elements],
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `v_n = exp(-j*theta_n)`.
    pub fn v(&self) -> CVector {
        CVector::from_iterator(
            self.theta.len(),
            self.theta.iter().map(|&t| Complex64::from_polar(1.0, -t)),
        )
    }

    /// Diagonal of `Psi`, i.e. `exp(j*theta_n)`.
    pub fn psi_diag(&self) -> CVector {
        CVector::from_iterator(
            self.theta.len(),
            self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)),
        )
    }
}

/// Per-user minimum received power and the energy conversion efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConstraints {
    min_power: Vec<f64>,
    eta: f64,
}

impl PowerConstraints {
    pub fn new(min_power: Vec<f64>, eta: f64) -> Result<Self> {
        if let Some(bad) = min_power.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "minimum power {bad} must be finite and non-negative"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("efficiency {eta} outside [0, 1]")));
        }
        Ok(Self { min_power, eta })
    }

    /// No minimum-power requirement, `eta = 1`.
    pub fn unconstrained(users: usize) -> Self {
        Self {
            min_power: vec![0.0; users],
            eta: 1.0,
        }
    }

    /// The same requirement `level` for every user, `eta = 1`.
    pub fn uniform(users: usize, level: f64) -> Result<Self> {
        Self::new(vec![level; users], 1.0)
    }

    pub fn min_power(&self) -> &[f64] {
        &self.min_power
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn num_users(&self) -> usize {
        self.min_power.len()
    }

    /// Requirement on `|h_k^H x|^2` once the efficiency is divided out.
    pub(crate) fn channel_requirement(&self, user: usize) -> Result<f64> {
        let p = self.min_power[user];
        if p == 0.0 {
            Ok(0.0)
        } else if self.eta == 0.0 {
            Err(Error::InfeasibleConstraint { user, required: p })
        } else {
            Ok(p / self.eta)
        }
    }

    /// Sum of the shortfalls `max(0, p_k - Q_k)`.
    pub fn violation(&self, powers: &[f64]) -> f64 {
        self.min_power
            .iter()
            .zip(powers)
            .map(|(p, q)| (p - q).max(0.0))
            .sum()
    }
}

/// `H = H_r * Psi * G + H_d`.
pub fn compose_channel(channels: &ChannelSet, ris: &RisPhases) -> Result<CMatrix> {
    if ris.len() != channels.num_elements() {
        return Err(Error::Dimension(format!(
            "{} RIS phases for {} elements",
            ris.len(),
            channels.num_elements()
        )));
    }
    let mut rotated = channels.cascade.clone();
    for (mut row, psi) in rotated.row_iter_mut().zip(ris.psi_diag().iter()) {
        row *= *psi;
    }
    Ok(&channels.ris_user * rotated + &channels.direct)
}

/// `Q_k = eta * |h_k^H x|^2` for every user.
pub fn received_powers(h: &CMatrix, beamformer: &TxBeamformer, eta: f64) -> Result<Vec<f64>> {
    if h.ncols() != beamformer.num_antennas() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, beamformer {} antennas",
            h.ncols(),
            beamformer.num_antennas()
        )));
    }
    Ok(signal_powers(h, &beamformer.vector())
        .into_iter()
        .map(|q| eta * q)
        .collect())
}

/// `|h_k^H x|^2` for an arbitrary complex `x`.
pub(crate) fn signal_powers(h: &CMatrix, x: &CVector) -> Vec<f64> {
    (h * x).iter().map(|y| y.norm_sqr()).collect()
}

pub fn total_power(powers: &[f64]) -> f64 {
    powers.iter().sum()
}

/// Entry `k` is true iff `Q_k >= p_k - tol`.
pub fn check_feasibility(powers: &[f64], constraints: &PowerConstraints, tol: f64) -> Vec<bool> {
    debug_assert_eq!(powers.len(), constraints.num_users());
    powers
        .iter()
        .zip(&constraints.min_power)
        .map(|(q, p)| *q >= p - tol)
        .collect()
}

/// Linear minorizer of `||H x||^2` expanded at `x_hat`:
/// `2 Re{x_hat^H H^H H x} - x_hat^H H^H H x_hat`.
pub fn sca_bound_x(h: &CMatrix, x_hat: &CVector, x: &CVector) -> f64 {
    let hx_hat = h * x_hat;
    let hx = h * x;
    2.0 * hx_hat.dotc(&hx).re - hx_hat.norm_squared()
}

/// The RIS-block quadratic form `b^H L b` with `L = sum_k l_k l_k^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisQuadratic {
    /// `l_k = [c_k; a_k]`, one per user.
    pub l: Vec<CVector>,
    pub gram: CMatrix,
}

impl RisQuadratic {
    /// `b^H L b`, evaluated as `sum_k |l_k^H b|^2`.
    pub fn value(&self, b: &CVector) -> f64 {
        self.l.iter().map(|l| l.dotc(b).norm_sqr()).sum()
    }
}

/// Builds `c_k = diag(conj(h_r,k)) G x`, `a_k = h_d,k^H x`, `l_k = [c_k; a_k]`
/// and `L = sum_k l_k l_k^H` for a fixed beamformer.
pub fn build_ris_quadratic(channels: &ChannelSet, beamformer: &TxBeamformer) -> Result<RisQuadratic> {
    if beamformer.num_antennas() != channels.num_antennas() {
        return Err(Error::Dimension(format!(
            "beamformer has {} antennas, channels {}",
            beamformer.num_antennas(),
            channels.num_antennas()
        )));
    }
    let n = channels.num_elements();
    let x = beamformer.vector();
    let gx = &channels.cascade * &x;
    let direct = &channels.direct * &x;

    let l: Vec<CVector> = (0..channels.num_users())
        .map(|k| {
            let row = channels.ris_user.row(k);
            CVector::from_iterator(
                n + 1,
                (0..n).map(|i| row[i] * gx[i]).chain(std::iter::once(direct[k])),
            )
        })
        .collect();

    let mut gram = CMatrix::zeros(n + 1, n + 1);
    for lk in &l {
        gram += lk * lk.adjoint();
    }
    Ok(RisQuadratic { l, gram })
}
