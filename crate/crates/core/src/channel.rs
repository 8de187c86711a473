//! Link budget and fading model for satellite → user links.
//!
//! The complex baseband channel of link `(n, m)` is `h = sqrt(β)·g`, with
//! `g` a Rician vector over the `L` satellite antennas. The delay phase `θ`
//! relative to the user's reference satellite turns it into the effective
//! channel `h̃ = θ·h`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::bessel::bessel_j1;
use crate::error::{ConfigErrors, Error, Result};
use crate::geometry::SPEED_OF_LIGHT_M_S;
use crate::{CMatrix, CVector, C64};

/// K-factors above this are treated as pure line of sight.
pub const RICIAN_K_CAP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    #[serde(default = "d_frequency")]
    pub frequency_mhz: f64,
    #[serde(default = "d_bandwidth")]
    pub bandwidth_hz: f64,
    /// `None` resolves to `1 / bandwidth_hz`.
    #[serde(default)]
    pub symbol_duration_s: Option<f64>,
    #[serde(default = "d_antennas")]
    pub antennas_per_sat: usize,
    #[serde(default = "d_spacing")]
    pub antenna_spacing_wavelengths: f64,
    #[serde(default = "d_rician")]
    pub rician_k: f64,
    #[serde(default = "d_shadowing")]
    pub shadowing_var_db: f64,
    #[serde(default)]
    pub other_losses_db: f64,
    #[serde(default = "d_sat_gain")]
    pub sat_gain_dbi: f64,
    #[serde(default)]
    pub user_gain_db: f64,
    #[serde(default = "d_aperture")]
    pub antenna_aperture_wavelengths: f64,
    #[serde(default = "d_noise_psd")]
    pub noise_psd_dbm_hz: f64,
    #[serde(default = "d_max_tx")]
    pub max_tx_power_dbw: f64,
    #[serde(default)]
    pub pilot_power_dbw: f64,
    #[serde(default = "d_loss_cap")]
    pub antenna_loss_cap_db: f64,
}

fn d_frequency() -> f64 {
    2000.0
}
fn d_bandwidth() -> f64 {
    1e6
}
fn d_antennas() -> usize {
    4
}
fn d_spacing() -> f64 {
    0.5
}
fn d_rician() -> f64 {
    10.0
}
fn d_shadowing() -> f64 {
    5.0
}
fn d_sat_gain() -> f64 {
    30.0
}
fn d_aperture() -> f64 {
    10.0
}
fn d_noise_psd() -> f64 {
    -174.0
}
fn d_max_tx() -> f64 {
    15.0
}
fn d_loss_cap() -> f64 {
    60.0
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            frequency_mhz: d_frequency(),
            bandwidth_hz: d_bandwidth(),
            symbol_duration_s: None,
            antennas_per_sat: d_antennas(),
            antenna_spacing_wavelengths: d_spacing(),
            rician_k: d_rician(),
            shadowing_var_db: d_shadowing(),
            other_losses_db: 0.0,
            sat_gain_dbi: d_sat_gain(),
            user_gain_db: 0.0,
            antenna_aperture_wavelengths: d_aperture(),
            noise_psd_dbm_hz: d_noise_psd(),
            max_tx_power_dbw: d_max_tx(),
            pilot_power_dbw: 0.0,
            antenna_loss_cap_db: d_loss_cap(),
        }
    }
}

impl RadioConfig {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / (self.frequency_mhz * 1e6)
    }

    pub fn antenna_spacing_m(&self) -> f64 {
        self.antenna_spacing_wavelengths * self.wavelength_m()
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration_s.unwrap_or(1.0 / self.bandwidth_hz)
    }

    /// Thermal noise power over the bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10();
        db_to_linear(dbm - 30.0)
    }

    pub fn pilot_power_w(&self) -> f64 {
        db_to_linear(self.pilot_power_dbw)
    }

    pub fn max_tx_power_w(&self) -> f64 {
        db_to_linear(self.max_tx_power_dbw)
    }

    pub fn resolve(&mut self) {
        self.symbol_duration_s = Some(self.symbol_duration());
    }

    // negated comparisons so that NaN fails every check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self, errs: &mut ConfigErrors) {
        if !(self.frequency_mhz > 0.0) {
            errs.push("radio.frequency_mhz", "must be positive");
        }
        if !(self.bandwidth_hz > 0.0) {
            errs.push("radio.bandwidth_hz", "must be positive");
        }
        if let Some(ts) = self.symbol_duration_s {
            if !(ts > 0.0) {
                errs.push("radio.symbol_duration_s", "must be positive");
            }
        }
        if self.antennas_per_sat == 0 {
            errs.push("radio.antennas_per_sat", "must be at least 1");
        }
        if !(self.antenna_spacing_wavelengths > 0.0) {
            errs.push("radio.antenna_spacing_wavelengths", "must be positive");
        }
        if !(self.rician_k >= 0.0) {
            errs.push("radio.rician_k", "must be non-negative");
        }
        if !(self.shadowing_var_db >= 0.0) {
            errs.push("radio.shadowing_var_db", "must be non-negative");
        }
        if !(self.antenna_aperture_wavelengths > 0.0) {
            errs.push("radio.antenna_aperture_wavelengths", "must be positive");
        }
        if !(self.antenna_loss_cap_db > 0.0) {
            errs.push("radio.antenna_loss_cap_db", "must be positive");
        }
        for (field, v) in [
            ("radio.other_losses_db", self.other_losses_db),
            ("radio.sat_gain_dbi", self.sat_gain_dbi),
            ("radio.user_gain_db", self.user_gain_db),
            ("radio.noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("radio.max_tx_power_dbw", self.max_tx_power_dbw),
            ("radio.pilot_power_dbw", self.pilot_power_dbw),
        ] {
            if !v.is_finite() {
                errs.push(field, "must be finite");
            }
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Free-space path loss in dB with `f` in MHz and `r` in km.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn free_space_path_loss(f_mhz: f64, r_km: f64) -> Result<f64> {
    if !(f_mhz > 0.0) || !(r_km > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "path loss needs positive frequency and range (got {f_mhz} MHz, {r_km} km)"
        )));
    }
    Ok(32.45 + 20.0 * f_mhz.log10() + 20.0 * r_km.log10())
}

/// Beam-misalignment loss of a circular aperture of radius `eta`
/// wavelengths, seen at off-boresight angle `w`. Linear factor, `1` on
/// boresight and `+∞` exactly at a pattern null.
pub fn antenna_loss(w: f64, eta: f64) -> f64 {
    let x = TAU * eta * w.sin();
    if x == 0.0 {
        return 1.0;
    }
    let ratio = x / bessel_j1(x);
    0.25 * ratio * ratio
}

/// Log-normal shadowing sample, returned in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(rng: &mut R, variance_db2: f64) -> f64 {
    if variance_db2 <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, variance_db2.sqrt())
        .expect("finite positive std-dev")
        .sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeScale {
    /// Linear power gain.
    pub beta: f64,
    pub fspl_db: f64,
    pub shadow_db: f64,
    pub ant_loss_db: f64,
    pub other_db: f64,
    /// Satellite plus user antenna gain.
    pub gains_db: f64,
}

impl LargeScale {
    pub fn from_components(fspl_db: f64, shadow_db: f64, ant_loss_db: f64, other_db: f64, gains_db: f64) -> Self {
        let beta_db = gains_db - (fspl_db + shadow_db + ant_loss_db + other_db);
        Self {
            beta: db_to_linear(beta_db),
            fspl_db,
            shadow_db,
            ant_loss_db,
            other_db,
            gains_db,
        }
    }

    pub fn beta_db(&self) -> f64 {
        self.gains_db - (self.fspl_db + self.shadow_db + self.ant_loss_db + self.other_db)
    }
}

/// Large-scale gain for a link with a given shadowing realisation.
pub fn large_scale_with_shadow(
    range_m: f64,
    boresight_rad: f64,
    shadow_db: f64,
    cfg: &RadioConfig,
) -> Result<LargeScale> {
    let fspl = free_space_path_loss(cfg.frequency_mhz, range_m / 1000.0)?;
    let ant = linear_to_db(antenna_loss(boresight_rad, cfg.antenna_aperture_wavelengths)).min(cfg.antenna_loss_cap_db);
    Ok(LargeScale::from_components(
        fspl,
        shadow_db,
        ant,
        cfg.other_losses_db,
        cfg.sat_gain_dbi + cfg.user_gain_db,
    ))
}

pub fn large_scale<R: Rng + ?Sized>(
    range_m: f64,
    boresight_rad: f64,
    cfg: &RadioConfig,
    rng: &mut R,
) -> Result<LargeScale> {
    let shadow = sample_shadowing(rng, cfg.shadowing_var_db);
    large_scale_with_shadow(range_m, boresight_rad, shadow, cfg)
}

/// Line-of-sight array response of a uniform linear array.
pub fn los_steering(aoa: f64, antennas: usize, spacing_m: f64, wavelength_m: f64) -> CVector {
    let step = TAU * spacing_m / wavelength_m * aoa.sin();
    CVector::from_iterator(
        antennas,
        (0..antennas).map(|l| Complex64::from_polar(1.0, -(l as f64) * step)),
    )
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Rician mixing weights `(sqrt(κ/(1+κ)), sqrt(1/(1+κ)))`.
pub fn rician_weights(k: f64) -> (f64, f64) {
    let k = k.min(RICIAN_K_CAP);
    ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt())
}

/// Combines a line-of-sight vector with an NLoS draw `g″`.
pub fn mix_small_scale(los: &CVector, nlos: &CVector, k: f64) -> CVector {
    let (a, b) = rician_weights(k);
    los * C64::from(a) + nlos * C64::from(b)
}

pub fn sample_small_scale<R: Rng + ?Sized>(los: &CVector, k: f64, rng: &mut R) -> CVector {
    let nlos = CVector::from_fn(los.len(), |_, _| complex_gaussian(rng));
    mix_small_scale(los, &nlos, k)
}

/// Delay phase `exp(−j·2π·Δt/T_s)`.
pub fn phase_shift(dt: f64, symbol_duration: f64) -> C64 {
    let cycles = (dt / symbol_duration).rem_euclid(1.0);
    Complex64::from_polar(1.0, -TAU * cycles)
}

/// `E[h hᴴ] = β·(κ/(1+κ)·g′g′ᴴ + 1/(1+κ)·I)`.
pub fn correlation_matrix(beta: f64, k: f64, los: &CVector) -> CMatrix {
    let (a, b) = rician_weights(k);
    let l = los.len();
    let mut r = los * los.adjoint() * C64::from(beta * a * a);
    for i in 0..l {
        r[(i, i)] += C64::from(beta * b * b);
    }
    // exact Hermitian symmetry
    for i in 0..l {
        r[(i, i)].im = 0.0;
        for j in (i + 1)..l {
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    r
}

/// `h = sqrt(β)·g` and `h̃ = θ·h`.
pub fn realize_channel(beta: f64, small: &CVector, theta: C64) -> (CVector, CVector) {
    let h = small * C64::from(beta.sqrt());
    let h_eff = &h * theta;
    (h, h_eff)
}

/// Statistics of one link that stay fixed for a drop.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    pub large: LargeScale,
    pub aoa: f64,
    pub los_vector: CVector,
    pub correlation: CMatrix,
    pub rician_k: f64,
}

impl ChannelState {
    pub fn new(large: LargeScale, aoa: f64, cfg: &RadioConfig) -> Self {
        let los_vector = los_steering(aoa, cfg.antennas_per_sat, cfg.antenna_spacing_m(), cfg.wavelength_m());
        let correlation = correlation_matrix(large.beta, cfg.rician_k, &los_vector);
        Self {
            large,
            aoa,
            los_vector,
            correlation,
            rician_k: cfg.rician_k,
        }
    }

    pub fn beta(&self) -> f64 {
        self.large.beta
    }

    /// Phase-free channel `h` for a given NLoS draw.
    pub fn realize(&self, nlos: &CVector) -> CVector {
        mix_small_scale(&self.los_vector, nlos, self.rician_k) * C64::from(self.large.beta.sqrt())
    }
}
