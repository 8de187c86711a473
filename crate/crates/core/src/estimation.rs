//! Uplink pilot reception and per-satellite LMMSE channel estimation.
//!
//! After despreading with user `n`'s pilot, satellite `m` observes
//!
//! ```text
//! y = sqrt(τ_p) Σ_{j ∈ C_n} sqrt(a_jm p_j) θ_jm h_jm + w,   w ~ CN(0, σ² I)
//! ```
//!
//! and the linear MMSE estimate of the phase-free channel `h_nm` is
//! `ĥ = sqrt(τ_p p_n a_nm) θ*_nm R_nm Ψ⁻¹ y` with
//! `Ψ = τ_p Σ_j p_j a_jm R_jm + σ² I`.

use nalgebra::linalg::Cholesky;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::error::{Error, Result};
use crate::pilots::PilotBook;
use crate::{CMatrix, CVector, C64};

/// One user's contribution to a satellite's received pilot block.
#[derive(Debug, Clone, Copy)]
pub struct PilotTransmission<'a> {
    pub user: usize,
    /// Effective channel `h̃ = θ·h` towards this satellite.
    pub channel: &'a CVector,
    pub power: f64,
    /// Cluster indicator `a_nm`.
    pub served: bool,
}

/// `L × τ_p` matrix of i.i.d. `CN(0, variance)` entries.
pub fn pilot_noise<R: Rng + ?Sized>(antennas: usize, tau_p: usize, variance: f64, rng: &mut R) -> CMatrix {
    let s = variance.sqrt();
    CMatrix::from_fn(antennas, tau_p, |_, _| complex_gaussian(rng) * s)
}

/// `Y = Σ sqrt(a p) h̃ Ξᵀ + W`.
pub fn receive_pilots(
    antennas: usize,
    transmissions: &[PilotTransmission<'_>],
    book: &PilotBook,
    noise: Option<&CMatrix>,
) -> Result<CMatrix> {
    let tau_p = book.tau_p();
    let mut y = match noise {
        Some(w) => {
            if w.nrows() != antennas || w.ncols() != tau_p {
                return Err(Error::InvalidArgument(format!(
                    "noise block is {}×{}, expected {antennas}×{tau_p}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            w.clone()
        }
        None => CMatrix::zeros(antennas, tau_p),
    };
    for tx in transmissions.iter().filter(|t| t.served) {
        if tx.channel.len() != antennas {
            return Err(Error::InvalidArgument(format!(
                "user {} channel has {} entries, expected {antennas}",
                tx.user,
                tx.channel.len()
            )));
        }
        let pilot = book.pilot_of(tx.user).ok_or(Error::NoPilot(tx.user))?;
        let xi = book.sequence(pilot);
        let amp = C64::from(tx.power.sqrt());
        for t in 0..tau_p {
            let c = xi[t] * amp;
            for l in 0..antennas {
                y[(l, t)] += tx.channel[l] * c;
            }
        }
    }
    Ok(y)
}

/// `y = Y Ξ* / sqrt(τ_p)`.
pub fn despread(y: &CMatrix, pilot: &CVector) -> CVector {
    let scale = 1.0 / (pilot.len() as f64).sqrt();
    let mut out = CVector::zeros(y.nrows());
    for t in 0..y.ncols() {
        let c = pilot[t].conj() * scale;
        for l in 0..y.nrows() {
            out[l] += y[(l, t)] * c;
        }
    }
    out
}

/// Second-order statistics of one user sharing the pilot at this satellite.
#[derive(Debug, Clone, Copy)]
pub struct LinkStatistics<'a> {
    pub correlation: &'a CMatrix,
    pub power: f64,
    pub served: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: CVector,
    pub error_covariance: CMatrix,
}

/// Per-link LMMSE filter. Depends only on channel statistics, so it is built
/// once per drop and applied to every pilot observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseEstimator {
    filter: CMatrix,
    estimate_covariance: CMatrix,
    error_covariance: CMatrix,
}

impl LmmseEstimator {
    /// `own` is the estimated link, `co_pilot` every other user holding the
    /// same pilot (those with `served == false` drop out of `Ψ`).
    pub fn new(own: LinkStatistics<'_>, co_pilot: &[LinkStatistics<'_>], tau_p: usize, noise_var: f64) -> Result<Self> {
        let l = own.correlation.nrows();
        let tp = tau_p as f64;
        let mut psi = CMatrix::identity(l, l) * C64::from(noise_var);
        for s in std::iter::once(&own).chain(co_pilot.iter()).filter(|s| s.served) {
            psi += s.correlation * C64::from(tp * s.power);
        }
        if !own.served {
            return Ok(Self {
                filter: CMatrix::zeros(l, l),
                estimate_covariance: CMatrix::zeros(l, l),
                error_covariance: own.correlation.clone(),
            });
        }
        let chol = Cholesky::new(psi).ok_or(Error::SingularCovariance)?;
        // Ψ⁻¹R; both Hermitian so R Ψ⁻¹ = (Ψ⁻¹ R)ᴴ
        let psi_inv_r = chol.solve(own.correlation);
        let gain = (tp * own.power).sqrt();
        let filter = psi_inv_r.adjoint() * C64::from(gain);
        let estimate_covariance = hermitian_part(&(own.correlation * &psi_inv_r * C64::from(tp * own.power)));
        let error_covariance = hermitian_part(&(own.correlation - &estimate_covariance));
        Ok(Self {
            filter,
            estimate_covariance,
            error_covariance,
        })
    }

    /// `ĥ = θ* · A · y`.
    pub fn estimate(&self, y: &CVector, theta: C64) -> CVector {
        &self.filter * y * theta.conj()
    }

    pub fn filter(&self) -> &CMatrix {
        &self.filter
    }

    /// `E[ĥ ĥᴴ]`.
    pub fn estimate_covariance(&self) -> &CMatrix {
        &self.estimate_covariance
    }

    pub fn error_covariance(&self) -> &CMatrix {
        &self.error_covariance
    }

    /// `E[‖ĥ‖²]`.
    pub fn expected_norm_sq(&self) -> f64 {
        self.estimate_covariance.trace().re
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::from(0.5)
}

/// One-shot estimate from a despread observation.
pub fn lmmse_estimate(
    y: &CVector,
    own: LinkStatistics<'_>,
    co_pilot: &[LinkStatistics<'_>],
    theta: C64,
    tau_p: usize,
    noise_var: f64,
) -> Result<ChannelEstimate> {
    let est = LmmseEstimator::new(own, co_pilot, tau_p, noise_var)?;
    Ok(ChannelEstimate {
        h_hat: est.estimate(y, theta),
        error_covariance: est.error_covariance,
    })
}
