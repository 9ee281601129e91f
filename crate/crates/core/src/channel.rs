//! Seeded generation of two-RIS deployment scenarios.
//!
//! Geometry (2-D, meters):
//!
//! * the BS sits at the origin with its ULA along the x-axis;
//! * RIS 1 sits at distance `d1` in direction `delta0`, its ULA parallel to
//!   the BS array;
//! * RIS 2 sits at distance `d2` in direction `delta2`, its ULA rotated by
//!   `delta1` from the x-axis;
//! * the users served by RIS `i` are centered `d3` (RIS 1) or `d4` (RIS 2)
//!   meters beyond it on the ray from the BS, spaced `user_spacing` apart
//!   perpendicular to that ray.
//!
//! BS-RIS links and RIS-to-own-group links are Rician; BS-user links,
//! cross-group RIS-user links and explicitly blocked links are Rayleigh.
//! Every link is scaled by the distance pathloss of its endpoints.
//!
//! Randomness comes from ChaCha8 with one stream per link, keyed by
//! `(seed, link)`: stream `2^32 + l` for BS-RIS `l`, `2^33 + 2^16 l + k` for
//! RIS `l` to user `k`, `3 * 2^32 + k` for BS to user `k` and `2^34` for
//! random RIS phases. Entries are drawn row-major, real part first.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, ChannelSet, RisPhases};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// BS to RIS 1 distance.
    pub d1: f64,
    /// BS to RIS 2 distance.
    pub d2: f64,
    /// RIS 1 to the center of its user group.
    pub d3: f64,
    /// RIS 2 to the center of its user group.
    pub d4: f64,
    /// Direction of RIS 1 seen from the BS, measured from the BS array axis.
    pub delta0: f64,
    /// Orientation of the RIS 2 array relative to the BS array axis.
    pub delta1: f64,
    /// Direction of RIS 2 seen from the BS, measured from the BS array axis.
    pub delta2: f64,
    /// Spacing between neighboring users of a group.
    pub user_spacing: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            d1: 8.0,
            d2: 7.0,
            d3: 4.0,
            d4: 5.0,
            delta0: PI / 4.0,
            delta1: PI / 4.0,
            delta2: PI / 3.0,
            user_spacing: 0.5,
        }
    }
}

/// Power gain of every link at the 1 m reference distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceGain {
    /// Pathloss `d^-n` with no additional constant.
    #[default]
    Unit,
    /// Free-space value `(lambda / (4 pi))^2`.
    FreeSpace,
}

/// A RIS-to-user link forced to Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockedLink {
    pub ris: usize,
    pub user: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of BS antennas `M`.
    pub antennas: usize,
    /// Number of users `K`.
    pub users: usize,
    /// Element count of each of the two RISs.
    pub ris_elements: Vec<usize>,
    pub carrier_freq_hz: f64,
    pub tx_power_w: f64,
    /// Rician factor of the BS-RIS links.
    pub rician_g: f64,
    /// Rician factor of the RIS-to-own-group links.
    pub rician_hr: f64,
    pub pathloss_exp: f64,
    pub reference_gain: ReferenceGain,
    /// ULA element spacing in wavelengths, used for the BS and both RISs.
    pub element_spacing: f64,
    pub seed: u64,
    /// RIS index serving each user. Defaults to the first `ceil(K/2)` users
    /// on RIS 1 and the rest on RIS 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_groups: Option<Vec<usize>>,
    pub geometry: Geometry,
    pub blocked_links: Vec<BlockedLink>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 8,
            users: 8,
            ris_elements: vec![16, 16],
            carrier_freq_hz: 755e6,
            tx_power_w: 10.0,
            rician_g: 2.0,
            rician_hr: 2.0,
            pathloss_exp: 3.0,
            reference_gain: ReferenceGain::Unit,
            element_spacing: 0.5,
            seed: 0,
            user_groups: None,
            geometry: Geometry::default(),
            blocked_links: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    /// Amplitude gain of a link of length `distance`.
    pub fn link_gain(&self, distance: f64) -> Result<f64> {
        match self.reference_gain {
            ReferenceGain::FreeSpace => pathloss_gain(distance, self.pathloss_exp, self.carrier_freq_hz),
            ReferenceGain::Unit => {
                if !(distance > 0.0 && distance.is_finite()) {
                    return Err(Error::Domain(format!("link distance must be positive, got {distance}")));
                }
                Ok(distance.powf(-self.pathloss_exp / 2.0))
            }
        }
    }

    pub fn total_elements(&self) -> usize {
        self.ris_elements.iter().sum()
    }

    /// Serving RIS of every user.
    pub fn groups(&self) -> Vec<usize> {
        match &self.user_groups {
            Some(groups) => groups.clone(),
            None => {
                let first = self.users.div_ceil(2);
                (0..self.users).map(|k| usize::from(k >= first)).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::InvalidParameter("antennas and users must be positive".into()));
        }
        if self.ris_elements.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the layout has two RISs, got {} element counts",
                self.ris_elements.len()
            )));
        }
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("tx_power_w", self.tx_power_w),
            ("element_spacing", self.element_spacing),
            ("d1", self.geometry.d1),
            ("d2", self.geometry.d2),
            ("d3", self.geometry.d3),
            ("d4", self.geometry.d4),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.geometry.user_spacing >= 0.0) {
            return Err(Error::Domain("user_spacing must be non-negative".into()));
        }
        for (name, value) in [("rician_g", self.rician_g), ("rician_hr", self.rician_hr)] {
            if !(value >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        if !self.pathloss_exp.is_finite() {
            return Err(Error::InvalidParameter("pathloss_exp must be finite".into()));
        }
        let groups = self.groups();
        if groups.len() != self.users || groups.iter().any(|g| *g >= 2) {
            return Err(Error::InvalidParameter(format!(
                "user_groups must assign each of the {} users to RIS 0 or 1",
                self.users
            )));
        }
        if let Some(bad) = self.blocked_links.iter().find(|b| b.ris >= 2 || b.user >= self.users) {
            return Err(Error::InvalidParameter(format!("blocked link {bad:?} out of range")));
        }
        Ok(())
    }
}

/// `exp(j 2 pi spacing m sin(angle))` for `m = 0..count`.
pub fn steering_vector(count: usize, spacing_wavelengths: f64, angle: f64) -> CVector {
    let step = TAU * spacing_wavelengths * angle.sin();
    CVector::from_iterator(
        count,
        (0..count).map(|m| Complex64::from_polar(1.0, step * m as f64)),
    )
}

/// Free-space reference gain `(lambda / (4 pi))^2` at 1 m.
pub fn reference_gain(carrier_freq_hz: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
    (wavelength / (4.0 * PI)).powi(2)
}

/// Amplitude gain `sqrt(C0) * d^(-n/2)` with a 1 m reference distance.
pub fn pathloss_gain(distance: f64, exponent: f64, carrier_freq_hz: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Domain(format!("link distance must be positive, got {distance}")));
    }
    if !(carrier_freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "carrier frequency must be positive, got {carrier_freq_hz}"
        )));
    }
    Ok(reference_gain(carrier_freq_hz).sqrt() * distance.powf(-exponent / 2.0))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(K/(1+K)) * los + sqrt(1/(1+K)) * W` with `W` i.i.d. CN(0, 1).
/// An infinite factor returns `los` (the draws are still consumed).
pub fn rician_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    factor: f64,
    los: &CMatrix,
    rng: &mut R,
) -> Result<CMatrix> {
    if los.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "LoS component is {}x{}, expected {rows}x{cols}",
            los.nrows(),
            los.ncols()
        )));
    }
    if !(factor >= 0.0) {
        return Err(Error::InvalidParameter(format!("Rician factor {factor} is negative")));
    }
    let (los_weight, scatter_weight) = if factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((factor / (1.0 + factor)).sqrt(), (1.0 / (1.0 + factor)).sqrt())
    };
    let scatter = rayleigh_matrix(rows, cols, rng);
    Ok(los * Complex64::from(los_weight) + scatter * Complex64::from(scatter_weight))
}

/// I.i.d. CN(0, 1) entries.
pub fn rayleigh_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let values: Vec<Complex64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Independent random streams of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    BsRis(usize),
    RisUser { ris: usize, user: usize },
    BsUser(usize),
    RisPhases,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::BsRis(l) => (1 << 32) + l as u64,
            Stream::RisUser { ris, user } => (2 << 32) + ((ris as u64) << 16) + user as u64,
            Stream::BsUser(k) => (3 << 32) + k as u64,
            Stream::RisPhases => 4 << 32,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// RIS phases drawn uniformly on `[-pi, pi)` from the scenario's phase stream.
pub fn random_ris_phases(seed: u64, elements: usize) -> RisPhases {
    let mut rng = stream_rng(seed, Stream::RisPhases);
    RisPhases::new((0..elements).map(|_| rng.gen_range(-PI..PI)).collect())
        .expect("uniform draws are finite")
}

type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisPlacement {
    pub position: Point,
    /// Unit vector along the RIS array.
    pub axis: Point,
}

/// Node positions of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub bs_axis: Point,
    pub ris: Vec<RisPlacement>,
    pub users: Vec<Point>,
    pub groups: Vec<usize>,
}

impl Layout {
    pub fn bs_user_distance(&self, user: usize) -> f64 {
        norm(self.users[user])
    }

    pub fn ris_user_distance(&self, ris: usize, user: usize) -> f64 {
        norm(sub(self.users[user], self.ris[ris].position))
    }

    pub fn bs_ris_distance(&self, ris: usize) -> f64 {
        norm(self.ris[ris].position)
    }
}

pub fn layout(config: &ScenarioConfig) -> Result<Layout> {
    config.validate()?;
    let g = &config.geometry;
    let directions = [g.delta0, g.delta2];
    let distances = [g.d1, g.d2];
    let group_offsets = [g.d3, g.d4];
    let axes = [[1.0, 0.0], [g.delta1.cos(), g.delta1.sin()]];

    let ris: Vec<RisPlacement> = (0..2)
        .map(|i| RisPlacement {
            position: [distances[i] * directions[i].cos(), distances[i] * directions[i].sin()],
            axis: axes[i],
        })
        .collect();

    let groups = config.groups();
    let mut users = vec![[0.0; 2]; config.users];
    for i in 0..2 {
        let members: Vec<usize> = (0..config.users).filter(|k| groups[*k] == i).collect();
        let outward = [directions[i].cos(), directions[i].sin()];
        let across = [-outward[1], outward[0]];
        let center = [
            ris[i].position[0] + group_offsets[i] * outward[0],
            ris[i].position[1] + group_offsets[i] * outward[1],
        ];
        let mid = (members.len() as f64 - 1.0) / 2.0;
        for (j, &k) in members.iter().enumerate() {
            let offset = (j as f64 - mid) * g.user_spacing;
            users[k] = [center[0] + offset * across[0], center[1] + offset * across[1]];
        }
    }

    let layout = Layout {
        bs_axis: [1.0, 0.0],
        ris,
        users,
        groups,
    };
    for k in 0..config.users {
        for d in [layout.bs_user_distance(k), layout.ris_user_distance(0, k), layout.ris_user_distance(1, k)] {
            if !(d > 0.0) {
                return Err(Error::Domain(format!("user {k} coincides with another node")));
            }
        }
    }
    for l in 0..2 {
        if !(layout.bs_ris_distance(l) > 0.0) {
            return Err(Error::Domain(format!("RIS {l} coincides with the BS")));
        }
    }
    Ok(layout)
}

/// Angle from broadside of direction `to - from` for an array along `axis`.
fn array_angle(axis: Point, from: Point, to: Point) -> f64 {
    let d = sub(to, from);
    (dot(d, axis) / norm(d)).clamp(-1.0, 1.0).asin()
}

/// Channels of the configured scenario with unit reflection amplitudes.
pub fn build_scenario(config: &ScenarioConfig) -> Result<ChannelSet> {
    let layout = layout(config)?;
    let m = config.antennas;
    let k_users = config.users;
    let n_total = config.total_elements();
    let spacing = config.element_spacing;
    let gain = |d: f64| config.link_gain(d);
    let origin = [0.0, 0.0];

    let mut s = CMatrix::zeros(n_total, m);
    let mut h_r = CMatrix::zeros(k_users, n_total);
    let mut offset = 0;
    for (l, &n_l) in config.ris_elements.iter().enumerate() {
        let placement = &layout.ris[l];
        let bs_side = steering_vector(m, spacing, array_angle(layout.bs_axis, origin, placement.position));
        let ris_side = steering_vector(n_l, spacing, array_angle(placement.axis, placement.position, origin));
        let los = &ris_side * bs_side.adjoint();
        let mut rng = stream_rng(config.seed, Stream::BsRis(l));
        let link = rician_matrix(n_l, m, config.rician_g, &los, &mut rng)?
            * Complex64::from(gain(layout.bs_ris_distance(l))?);
        s.view_mut((offset, 0), (n_l, m)).copy_from(&link);

        for k in 0..k_users {
            let mut rng = stream_rng(config.seed, Stream::RisUser { ris: l, user: k });
            let blocked = layout.groups[k] != l
                || config.blocked_links.contains(&BlockedLink { ris: l, user: k });
            let row = if blocked {
                rayleigh_matrix(1, n_l, &mut rng)
            } else {
                let toward = steering_vector(
                    n_l,
                    spacing,
                    array_angle(placement.axis, placement.position, layout.users[k]),
                );
                rician_matrix(1, n_l, config.rician_hr, &CMatrix::from_row_slice(1, n_l, toward.as_slice()), &mut rng)?
            } * Complex64::from(gain(layout.ris_user_distance(l, k))?);
            h_r.view_mut((k, offset), (1, n_l)).copy_from(&row);
        }
        offset += n_l;
    }

    let mut h_d = CMatrix::zeros(k_users, m);
    for k in 0..k_users {
        let mut rng = stream_rng(config.seed, Stream::BsUser(k));
        let row = rayleigh_matrix(1, m, &mut rng) * Complex64::from(gain(layout.bs_user_distance(k))?);
        h_d.row_mut(k).copy_from(&row);
    }

    ChannelSet::new(h_d, h_r, s, vec![1.0; n_total], config.ris_elements.clone())
}
