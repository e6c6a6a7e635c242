//! Network geometry drops, large-scale path loss and Rician small-scale
//! fading for the five link families (PT-AP, PT-PU, PT-RIS, RIS-AP, RIS-PU),
//! plus the ST links used by the active-antenna benchmark.
//!
//! The PT carries a ULA along the x-axis; every RIS is a UPA in the xz-plane
//! with `K_x` columns and `K_z = K / K_x` rows. Line-of-sight angles come
//! from the drawn coordinates.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, C64};

pub const REFERENCE_LOSS_DB: f64 = -20.0;
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
/// Preferred number of UPA columns per RIS.
pub const RIS_COLUMNS: usize = 5;

const STREAM_GEOMETRY: u64 = 0;
const STREAM_CHANNELS: u64 = 1;
const STREAM_ACTIVE: u64 = 2;

pub type Point = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossExponents {
    pub pt_ap: f64,
    pub ris_pu: f64,
    pub pt_ris: f64,
    pub ris_ap: f64,
    pub pt_pu: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self { pt_ap: 3.5, ris_pu: 2.8, pt_ris: 2.2, ris_ap: 2.8, pt_pu: 2.8 }
    }
}

impl PathLossExponents {
    fn all(&self) -> [f64; 5] {
        [self.pt_ap, self.ris_pu, self.pt_ris, self.ris_ap, self.pt_pu]
    }
}

/// Everything needed to draw a [`Scenario`], except the random positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub n_pt_antennas: usize,
    pub n_ris: usize,
    pub elements_per_ris: usize,
    /// UPA columns; `None` picks [`default_ris_columns`].
    pub ris_columns: Option<usize>,
    pub rician_kappa: f64,
    pub pathloss: PathLossExponents,
    pub beta0_db: f64,
    pub spacing_ratio: f64,
    pub pt_position: Point,
    pub ap_position: Point,
    /// Center (x, y) of the disc holding the RIS footprints.
    pub ris_center: [f64; 2],
    pub ris_radius: f64,
    pub ris_height: [f64; 2],
    /// Radius of the ground disc (centered at the origin) holding the PU.
    pub pu_radius: f64,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            n_pt_antennas: 4,
            n_ris: 4,
            elements_per_ris: 20,
            ris_columns: None,
            rician_kappa: 3.0,
            pathloss: PathLossExponents::default(),
            beta0_db: REFERENCE_LOSS_DB,
            spacing_ratio: 0.5,
            pt_position: Point::new(0.0, 0.0, 10.0),
            ap_position: Point::new(20.0, 15.0, 1.0),
            ris_center: [5.0, 0.0],
            ris_radius: 10.0,
            ris_height: [7.0, 10.0],
            pu_radius: 20.0,
        }
    }
}

impl ScenarioTemplate {
    /// Small profile used for tests and quick experiments: M = 2, K = 8, N = 4.
    pub fn desk() -> Self {
        Self { n_ris: 2, elements_per_ris: 8, ..Self::default() }
    }

    pub fn ris_layout(&self) -> Result<(usize, usize)> {
        let k = self.elements_per_ris;
        if k == 0 {
            return Err(Error::InvalidArgument("elements_per_ris must be positive".into()));
        }
        let kx = self.ris_columns.unwrap_or_else(|| default_ris_columns(k));
        if kx == 0 || k % kx != 0 {
            return Err(Error::InvalidArgument(format!(
                "K = {k} is not divisible by K_x = {kx}"
            )));
        }
        Ok((kx, k / kx))
    }
}

/// `K_x = 5` when it divides `K`, otherwise the largest divisor of `K` not
/// above 5.
pub fn default_ris_columns(k: usize) -> usize {
    (1..=RIS_COLUMNS.min(k.max(1))).rev().find(|d| k % d == 0).unwrap_or(1)
}

/// One network drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_pt_antennas: usize,
    pub n_ris: usize,
    pub elements_per_ris: usize,
    pub ris_columns: usize,
    pub ris_rows: usize,
    pub pt: Point,
    pub ap: Point,
    pub pu: Point,
    pub ris: Vec<Point>,
    pub rician_kappa: f64,
    pub pathloss: PathLossExponents,
    pub beta0_db: f64,
    pub spacing_ratio: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_pt_antennas == 0 || self.elements_per_ris == 0 {
            return Err(Error::InvalidArgument("array sizes must be positive".into()));
        }
        if self.ris_columns * self.ris_rows != self.elements_per_ris {
            return Err(Error::InvalidArgument(format!(
                "K = {} is not K_x ({}) x K_z ({})",
                self.elements_per_ris, self.ris_columns, self.ris_rows
            )));
        }
        if self.ris.len() != self.n_ris {
            return Err(Error::Dimension(format!(
                "{} RIS positions for {} RIS",
                self.ris.len(),
                self.n_ris
            )));
        }
        let finite = |p: &Point| p.iter().all(|v| v.is_finite());
        if ![self.pt, self.ap, self.pu].iter().all(finite) || !self.ris.iter().all(finite) {
            return Err(Error::InvalidArgument("positions must be finite".into()));
        }
        if !(self.rician_kappa >= 0.0) {
            return Err(Error::InvalidArgument("Rician factor must be nonnegative".into()));
        }
        if self.pathloss.all().iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidArgument("path-loss exponents must be positive".into()));
        }
        Ok(())
    }
}

/// All channels of one drop. `h`, `h_p` are PT-side N-vectors, `f[j]` is
/// the K x N PT-to-RIS matrix and `g[j]`, `g_p[j]` are K-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: CVector,
    pub h_p: CVector,
    pub f: Vec<CMatrix>,
    pub g: Vec<CVector>,
    pub g_p: Vec<CVector>,
}

impl ChannelSet {
    pub fn n_antennas(&self) -> usize {
        self.h.len()
    }

    pub fn n_ris(&self) -> usize {
        self.f.len()
    }

    pub fn n_elements(&self) -> usize {
        self.f.first().map_or(0, |f| f.nrows())
    }

    /// Channels restricted to the listed RIS, in the listed order.
    pub fn subset(&self, ris: &[usize]) -> Result<ChannelSet> {
        for &j in ris {
            if j >= self.n_ris() {
                return Err(Error::IndexOutOfRange { index: j, len: self.n_ris() });
            }
        }
        Ok(ChannelSet {
            h: self.h.clone(),
            h_p: self.h_p.clone(),
            f: ris.iter().map(|&j| self.f[j].clone()).collect(),
            g: ris.iter().map(|&j| self.g[j].clone()).collect(),
            g_p: ris.iter().map(|&j| self.g_p[j].clone()).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_antennas();
        let k = self.n_elements();
        if self.h_p.len() != n || self.g.len() != self.n_ris() || self.g_p.len() != self.n_ris() {
            return Err(Error::Dimension("inconsistent channel set".into()));
        }
        for j in 0..self.n_ris() {
            if self.f[j].shape() != (k, n) || self.g[j].len() != k || self.g_p[j].len() != k {
                return Err(Error::Dimension(format!("inconsistent channels for RIS {j}")));
            }
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        let all_finite = self.h.iter().chain(self.h_p.iter()).all(finite)
            && self.f.iter().all(|m| m.iter().all(finite))
            && self.g.iter().chain(self.g_p.iter()).all(|v| v.iter().all(finite));
        if !all_finite {
            return Err(Error::InvalidArgument("non-finite channel entry".into()));
        }
        Ok(())
    }
}

/// ST-side channels for the active-antenna benchmark: one multi-antenna ST
/// co-located with each RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveChannelSet {
    pub to_ap: Vec<CVector>,
    pub to_pu: Vec<CVector>,
}

/// `beta0 - 10 alpha log10(d / d0)` with the default reference loss.
pub fn path_loss_db(distance: f64, exponent: f64) -> Result<f64> {
    path_loss_db_with(REFERENCE_LOSS_DB, distance, exponent)
}

pub fn path_loss_db_with(beta0_db: f64, distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!("link distance must be positive, got {distance}")));
    }
    Ok(beta0_db - 10.0 * exponent * (distance / REFERENCE_DISTANCE_M).log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `dBm -> W`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Entry `n` is `exp(-j 2 pi s n cos(phi))`.
pub fn ula_steering(n: usize, phi: f64, spacing_ratio: f64) -> CVector {
    let step = -2.0 * std::f64::consts::PI * spacing_ratio * phi.cos();
    CVector::from_fn(n, |i, _| C64::from_polar(1.0, step * i as f64))
}

/// `a_x(phi, theta) ⊗ a_z(theta)`, entry `ix * kz + iz`.
pub fn upa_steering(kx: usize, kz: usize, phi: f64, theta: f64, spacing_ratio: f64) -> CVector {
    let two_pi_s = 2.0 * std::f64::consts::PI * spacing_ratio;
    let step_x = -two_pi_s * theta.sin() * phi.cos();
    let step_z = -two_pi_s * theta.cos();
    CVector::from_fn(kx * kz, |i, _| {
        let (ix, iz) = (i / kz, i % kz);
        C64::from_polar(1.0, step_x * ix as f64 + step_z * iz as f64)
    })
}

/// Azimuth (from +x in the xy-plane) and polar angle (from +z) of the ray
/// from `from` to `to`.
pub fn ray_angles(from: &Point, to: &Point) -> (f64, f64) {
    let d = to - from;
    let r = d.norm();
    (d.y.atan2(d.x), (d.z / r).clamp(-1.0, 1.0).acos())
}

/// Angle between the ray and the x-axis, as used by an x-aligned ULA.
fn ula_angle(from: &Point, to: &Point) -> f64 {
    let d = to - from;
    (d.x / d.norm()).clamp(-1.0, 1.0).acos()
}

/// `(sqrt(kappa/(kappa+1)), sqrt(1/(kappa+1)))`.
pub fn rician_weights(kappa: f64) -> (f64, f64) {
    ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_disc(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    (center[0] + r * t.cos(), center[1] + r * t.sin())
}

fn circular_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws RIS and PU positions. PT and AP stay where the template puts them.
pub fn draw_scenario(template: &ScenarioTemplate, seed: u64) -> Result<Scenario> {
    let (kx, kz) = template.ris_layout()?;
    let mut rng = rng_for(seed, STREAM_GEOMETRY);
    let ris = (0..template.n_ris)
        .map(|_| {
            let (x, y) = uniform_disc(&mut rng, template.ris_center, template.ris_radius);
            let [lo, hi] = template.ris_height;
            Point::new(x, y, lo + (hi - lo) * rng.random::<f64>())
        })
        .collect();
    let (px, py) = uniform_disc(&mut rng, [0.0, 0.0], template.pu_radius);
    let scenario = Scenario {
        n_pt_antennas: template.n_pt_antennas,
        n_ris: template.n_ris,
        elements_per_ris: template.elements_per_ris,
        ris_columns: kx,
        ris_rows: kz,
        pt: template.pt_position,
        ap: template.ap_position,
        pu: Point::new(px, py, 0.0),
        ris,
        rician_kappa: template.rician_kappa,
        pathloss: template.pathloss,
        beta0_db: template.beta0_db,
        spacing_ratio: template.spacing_ratio,
        seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

struct Fader<'a> {
    scenario: &'a Scenario,
    rng: ChaCha8Rng,
    los: f64,
    nlos: f64,
}

impl Fader<'_> {
    fn amplitude(&self, a: &Point, b: &Point, exponent: f64) -> f64 {
        let d = (b - a).norm();
        let db = path_loss_db_with(self.scenario.beta0_db, d, exponent)
            .expect("distinct node positions");
        db_to_linear(db).sqrt()
    }

    fn vector(&mut self, los: CVector, amplitude: f64) -> CVector {
        let (wl, wn) = (self.los, self.nlos);
        los.map(|l| (l * wl + circular_gaussian(&mut self.rng) * wn) * amplitude)
    }

    fn matrix(&mut self, los: CMatrix, amplitude: f64) -> CMatrix {
        let (wl, wn) = (self.los, self.nlos);
        los.map(|l| (l * wl + circular_gaussian(&mut self.rng) * wn) * amplitude)
    }

    fn pt_steering(&self, to: &Point) -> CVector {
        let s = self.scenario;
        ula_steering(s.n_pt_antennas, ula_angle(&s.pt, to), s.spacing_ratio)
    }

    fn ris_steering(&self, j: usize, to: &Point) -> CVector {
        let s = self.scenario;
        let (phi, theta) = ray_angles(&s.ris[j], to);
        upa_steering(s.ris_columns, s.ris_rows, phi, theta, s.spacing_ratio)
    }
}

/// Draws every channel of `scenario`:
/// `sqrt(PL) * (sqrt(k/(k+1)) LoS + sqrt(1/(k+1)) NLoS)` per link, with NLoS
/// entries i.i.d. `CN(0, 1)`.
pub fn draw_channels(scenario: &Scenario, seed: u64) -> Result<ChannelSet> {
    scenario.validate()?;
    let (los, nlos) = rician_weights(scenario.rician_kappa);
    let mut fader = Fader { scenario, rng: rng_for(seed, STREAM_CHANNELS), los, nlos };
    let s = scenario;
    let pl = s.pathloss;

    let h = {
        let a = fader.amplitude(&s.pt, &s.ap, pl.pt_ap);
        let l = fader.pt_steering(&s.ap);
        fader.vector(l, a)
    };
    let h_p = {
        let a = fader.amplitude(&s.pt, &s.pu, pl.pt_pu);
        let l = fader.pt_steering(&s.pu);
        fader.vector(l, a)
    };
    let mut f = Vec::with_capacity(s.n_ris);
    let mut g = Vec::with_capacity(s.n_ris);
    let mut g_p = Vec::with_capacity(s.n_ris);
    for j in 0..s.n_ris {
        let ris = s.ris[j];
        let a = fader.amplitude(&s.pt, &ris, pl.pt_ris);
        let rx = fader.ris_steering(j, &s.pt);
        let tx = fader.pt_steering(&ris);
        f.push(fader.matrix(&rx * tx.adjoint(), a));

        let a = fader.amplitude(&ris, &s.ap, pl.ris_ap);
        let l = fader.ris_steering(j, &s.ap);
        g.push(fader.vector(l, a));

        let a = fader.amplitude(&ris, &s.pu, pl.ris_pu);
        let l = fader.ris_steering(j, &s.pu);
        g_p.push(fader.vector(l, a));
    }
    Ok(ChannelSet { h, h_p, f, g, g_p })
}

/// Channels from an `n_antennas` ULA at each RIS position to the AP and the
/// PU, reusing the RIS-AP and RIS-PU exponents.
pub fn draw_active_channels(scenario: &Scenario, seed: u64, n_antennas: usize) -> Result<ActiveChannelSet> {
    scenario.validate()?;
    let (los, nlos) = rician_weights(scenario.rician_kappa);
    let mut fader = Fader { scenario, rng: rng_for(seed, STREAM_ACTIVE), los, nlos };
    let s = scenario;
    let mut to_ap = Vec::with_capacity(s.n_ris);
    let mut to_pu = Vec::with_capacity(s.n_ris);
    for st in &s.ris {
        let a = fader.amplitude(st, &s.ap, s.pathloss.ris_ap);
        let l = ula_steering(n_antennas, ula_angle(st, &s.ap), s.spacing_ratio);
        to_ap.push(fader.vector(l, a));
        let a = fader.amplitude(st, &s.pu, s.pathloss.ris_pu);
        let l = ula_steering(n_antennas, ula_angle(st, &s.pu), s.spacing_ratio);
        to_pu.push(fader.vector(l, a));
    }
    Ok(ActiveChannelSet { to_ap, to_pu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn path_loss_examples() {
        assert_relative_eq!(path_loss_db(1.0, 2.2).unwrap(), -20.0);
        assert_relative_eq!(path_loss_db(10.0, 2.0).unwrap(), -40.0, epsilon = 1e-12);
        assert_relative_eq!(path_loss_db(100.0, 3.5).unwrap(), -90.0, epsilon = 1e-12);
        assert!(path_loss_db(0.0, 2.0).is_err());
        assert!(path_loss_db(-3.0, 2.0).is_err());
    }

    #[test]
    fn ula_examples() {
        let a = ula_steering(1, 0.3, 0.5);
        assert_eq!(a.len(), 1);
        assert_relative_eq!(a[0].re, 1.0);

        let a = ula_steering(2, FRAC_PI_2, 0.5);
        assert_relative_eq!(a[1].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1].im, 0.0, epsilon = 1e-12);

        let a = ula_steering(2, 0.0, 0.5);
        assert_relative_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upa_examples() {
        let a = upa_steering(1, 1, 0.4, 0.9, 0.5);
        assert_eq!(a.len(), 1);
        assert_relative_eq!(a[0].re, 1.0);

        let a = upa_steering(2, 1, FRAC_PI_2, FRAC_PI_2, 0.5);
        assert_relative_eq!(a[1].re, 1.0, epsilon = 1e-12);

        let a = upa_steering(1, 2, 1.234, FRAC_PI_2, 0.5);
        assert_relative_eq!(a[1].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upa_is_kronecker_of_axis_vectors() {
        let (kx, kz, phi, theta, s) = (3, 2, 0.7, 1.1, 0.5);
        let a = upa_steering(kx, kz, phi, theta, s);
        let ax = CVector::from_fn(kx, |i, _| {
            C64::from_polar(1.0, -2.0 * PI * s * i as f64 * theta.sin() * phi.cos())
        });
        let az = CVector::from_fn(kz, |i, _| C64::from_polar(1.0, -2.0 * PI * s * i as f64 * theta.cos()));
        let kron = ax.kronecker(&az);
        assert!((a - kron).norm() < 1e-12);
    }

    #[test]
    fn default_columns_divide_k() {
        assert_eq!(default_ris_columns(20), 5);
        assert_eq!(default_ris_columns(8), 4);
        assert_eq!(default_ris_columns(16), 4);
        assert_eq!(default_ris_columns(7), 1);
        assert_eq!(default_ris_columns(3), 3);
        let t = ScenarioTemplate { elements_per_ris: 12, ris_columns: Some(5), ..ScenarioTemplate::desk() };
        assert!(t.ris_layout().is_err());
    }

    #[test]
    fn scenario_is_deterministic_and_supported() {
        let t = ScenarioTemplate::desk();
        let a = draw_scenario(&t, 42).unwrap();
        let b = draw_scenario(&t, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pt, Point::new(0.0, 0.0, 10.0));
        assert_eq!(a.ap, Point::new(20.0, 15.0, 1.0));
        assert_eq!(a.pu.z, 0.0);
        assert!(a.pu.xy().norm() <= 20.0);
        for r in &a.ris {
            assert!(((r.x - 5.0).powi(2) + r.y.powi(2)).sqrt() <= 10.0);
        }
        let c = draw_scenario(&t, 43).unwrap();
        assert_ne!(a.ris, c.ris);
    }

    #[test]
    fn kappa_limit_collapses_to_los() {
        let t = ScenarioTemplate { rician_kappa: 1e12, ..ScenarioTemplate::desk() };
        let s = draw_scenario(&t, 7).unwrap();
        let ch = draw_channels(&s, 7).unwrap();
        let d = (s.ap - s.pt).norm();
        let amp = db_to_linear(path_loss_db(d, 3.5).unwrap()).sqrt();
        let los = ula_steering(4, ula_angle(&s.pt, &s.ap), 0.5) * c64(amp, 0.0);
        for i in 0..4 {
            assert!((ch.h[i] - los[i]).norm() <= 1e-5 * amp);
        }
    }

    #[test]
    fn rician_weights_normalize_power() {
        let (a, b) = rician_weights(3.0);
        assert_relative_eq!(a * a + b * b, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn channel_dimensions_match_scenario() {
        let s = draw_scenario(&ScenarioTemplate::desk(), 1).unwrap();
        let ch = draw_channels(&s, 1).unwrap();
        ch.validate().unwrap();
        assert_eq!(ch.n_antennas(), 4);
        assert_eq!(ch.n_ris(), 2);
        assert_eq!(ch.n_elements(), 8);
        assert_eq!(ch, draw_channels(&s, 1).unwrap());
        let sub = ch.subset(&[1]).unwrap();
        assert_eq!(sub.f[0], ch.f[1]);
        assert!(ch.subset(&[2]).is_err());
        let act = draw_active_channels(&s, 1, 4).unwrap();
        assert_eq!(act.to_ap.len(), 2);
        assert_eq!(act.to_ap[0].len(), 4);
    }
}
