//! Maximum-ratio downlink with coherent joint transmission.
//!
//! User `n` receives `X_n = Σ_{m ∈ A_n} sqrt(κ_nm) h̃_nmᴴ v_nm` on its own
//! symbol and `I_ni = Σ_{m ∈ A_i} sqrt(κ_im) h̃_nmᴴ v_im` from every other
//! user's symbol. Expectations over small-scale fading are estimated from
//! per-trial samples of these terms.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::clustering::Clusters;
use crate::error::{Error, Result};
use crate::{CVector, C64};

/// Number of contiguous trial batches used for standard errors.
pub const NUM_BATCHES: usize = 10;

/// Relative standard error above which a report is flagged.
pub const PRECISION_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderMode {
    PhaseAware,
    Asynchronous,
}

impl PrecoderMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PhaseAware => "phase_aware",
            Self::Asynchronous => "asynchronous",
        }
    }
}

pub fn make_precoder(h_hat: &CVector, theta: C64, mode: PrecoderMode) -> CVector {
    match mode {
        PrecoderMode::PhaseAware => h_hat * theta,
        PrecoderMode::Asynchronous => h_hat.clone(),
    }
}

/// `1 − τ_p/τ_c`.
pub fn prelog(tau_p: usize, tau_c: usize) -> Result<f64> {
    if tau_c == 0 || tau_p >= tau_c {
        return Err(Error::InvalidArgument(format!(
            "coherence block τ_c = {tau_c} must exceed τ_p = {tau_p}"
        )));
    }
    Ok(1.0 - tau_p as f64 / tau_c as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_max: f64,
    /// `κ_nm` keyed by `(satellite, user)`.
    pub coefficients: BTreeMap<(usize, usize), f64>,
}

impl PowerAllocation {
    pub fn get(&self, sat: usize, user: usize) -> f64 {
        self.coefficients.get(&(sat, user)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, sat: usize, user: usize, kappa: f64) {
        self.coefficients.insert((sat, user), kappa);
    }

    /// Zeroes every coefficient of `user`.
    pub fn silence(&mut self, user: usize) {
        for ((_, n), k) in self.coefficients.iter_mut() {
            if *n == user {
                *k = 0.0;
            }
        }
    }

    /// `Σ_n κ_nm E‖v_nm‖²` at `sat`.
    pub fn expected_radiated<F>(&self, sat: usize, expected_norm_sq: F) -> f64
    where
        F: Fn(usize, usize) -> f64,
    {
        self.coefficients
            .range((sat, 0)..=(sat, usize::MAX))
            .map(|(&(m, n), &k)| k * expected_norm_sq(n, m))
            .sum()
    }
}

/// Equal split of each satellite's budget over the users it serves,
/// normalized by the expected precoder energy `E‖v_nm‖² = E‖ĥ_nm‖²`.
pub fn allocate_power<F>(clusters: &Clusters, expected_norm_sq: F, p_max: f64) -> PowerAllocation
where
    F: Fn(usize, usize) -> f64,
{
    let mut served: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in clusters.values() {
        for &m in &c.members {
            served.entry(m).or_default().push(c.user);
        }
    }
    let mut alloc = PowerAllocation {
        p_max,
        coefficients: BTreeMap::new(),
    };
    for (m, users) in served {
        let share = p_max / users.len() as f64;
        for n in users {
            let e = expected_norm_sq(n, m);
            let kappa = if e > 0.0 && e.is_finite() { share / e } else { 0.0 };
            alloc.set(m, n, kappa);
        }
    }
    alloc
}

/// Per-trial desired signal and total interference power of every user.
///
/// `channels[n]` maps satellite id to `h̃_nm` for the links that exist;
/// satellites missing there contribute nothing to user `n`. `precoders[i]`
/// maps each member of `A_i` to `v_im`.
pub fn received_terms(
    channels: &[BTreeMap<usize, CVector>],
    precoders: &[BTreeMap<usize, CVector>],
    power: &PowerAllocation,
) -> Vec<(C64, f64)> {
    let n_users = channels.len();
    let amps: Vec<Vec<(usize, f64, &CVector)>> = precoders
        .iter()
        .enumerate()
        .map(|(i, vs)| {
            vs.iter()
                .map(|(&m, v)| (m, power.get(m, i).sqrt(), v))
                .filter(|&(_, a, _)| a > 0.0)
                .collect()
        })
        .collect();
    (0..n_users)
        .map(|n| {
            let mut signal = C64::new(0.0, 0.0);
            let mut interference = 0.0;
            for (i, terms) in amps.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(m, a, v) in terms {
                    if let Some(h) = channels[n].get(&m) {
                        acc += h.dotc(v) * a;
                    }
                }
                if i == n {
                    signal = acc;
                } else {
                    interference += acc.norm_sqr();
                }
            }
            (signal, interference)
        })
        .collect()
}

/// Mergeable running mean and variance of a complex sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexMoments {
    pub count: u64,
    pub mean: C64,
    /// Sum of squared deviations `Σ|x − mean|²`.
    pub m2: f64,
}

impl ComplexMoments {
    pub fn push(&mut self, x: C64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += (d.conj() * (x - self.mean)).re;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += d * (nb / n);
        self.m2 += other.m2 + d.norm_sqr() * na * nb / n;
        self.count += other.count;
    }

    /// Population variance `E|x − E x|²`.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }
}

/// Mergeable running mean of a real sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RealMean {
    pub count: u64,
    pub mean: f64,
}

impl RealMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        let n = (self.count + other.count) as f64;
        self.mean += (other.mean - self.mean) * (other.count as f64 / n);
        self.count += other.count;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TermMoments {
    pub signal: ComplexMoments,
    pub interference: RealMean,
}

impl TermMoments {
    pub fn push(&mut self, signal: C64, interference: f64) {
        self.signal.push(signal);
        self.interference.push(interference);
    }

    pub fn merge(&mut self, other: &Self) {
        self.signal.merge(&other.signal);
        self.interference.merge(&other.interference);
    }

    pub fn sinr(&self, noise: f64) -> f64 {
        let coherent = self.signal.mean.norm_sqr();
        let denom = self.signal.variance() + self.interference.mean + noise;
        if coherent == 0.0 {
            0.0
        } else {
            coherent / denom
        }
    }
}

/// Per-user accumulator with fixed batch partitioning of the trial index.
#[derive(Clone, Debug, PartialEq)]
pub struct UserAccumulator {
    pub trials: usize,
    pub batches: Vec<TermMoments>,
}

impl UserAccumulator {
    pub fn new(trials: usize) -> Self {
        Self {
            trials,
            batches: vec![TermMoments::default(); NUM_BATCHES.min(trials.max(1))],
        }
    }

    pub fn batch_of(&self, trial: usize) -> usize {
        (trial * self.batches.len() / self.trials.max(1)).min(self.batches.len() - 1)
    }

    pub fn push(&mut self, trial: usize, signal: C64, interference: f64) {
        let b = self.batch_of(trial);
        self.batches[b].push(signal, interference);
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.batches.len() != self.batches.len() {
            return Err(Error::InvalidArgument(
                "accumulators use different batch layouts".into(),
            ));
        }
        for (a, b) in self.batches.iter_mut().zip(&other.batches) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn total(&self) -> TermMoments {
        let mut t = TermMoments::default();
        for b in &self.batches {
            t.merge(b);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeReport {
    pub user: usize,
    /// `|E[X_n]|²`
    pub coherent_gain: f64,
    /// `E_n = Var[X_n]`
    pub beamforming_uncertainty: f64,
    /// `F_n = Σ_{i≠n} E|I_ni|²`
    pub interference: f64,
    pub noise: f64,
    pub sinr: f64,
    pub se: f64,
    pub trials: u64,
    /// Batch-means standard error; `None` with fewer than two batches.
    pub sinr_std_error: Option<f64>,
    pub se_std_error: Option<f64>,
    pub low_precision: bool,
}

impl SeReport {
    pub fn from_accumulator(user: usize, acc: &UserAccumulator, noise: f64, prelog: f64) -> Self {
        let total = acc.total();
        let sinr = total.sinr(noise);
        let se = prelog * (1.0 + sinr).log2();
        let filled: Vec<f64> = acc
            .batches
            .iter()
            .filter(|b| b.signal.count > 0)
            .map(|b| b.sinr(noise))
            .collect();
        let sinr_std_error = if filled.len() >= 2 {
            let k = filled.len() as f64;
            let m = filled.iter().sum::<f64>() / k;
            let var = filled.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
            Some((var / k).sqrt())
        } else {
            None
        };
        let se_std_error = sinr_std_error.map(|s| prelog * s / ((1.0 + sinr) * std::f64::consts::LN_2));
        let low_precision = match sinr_std_error {
            Some(s) => sinr > 0.0 && s > PRECISION_THRESHOLD * sinr,
            None => true,
        };
        Self {
            user,
            coherent_gain: total.signal.mean.norm_sqr(),
            beamforming_uncertainty: total.signal.variance(),
            interference: total.interference.mean,
            noise,
            sinr,
            se,
            trials: total.signal.count,
            sinr_std_error,
            se_std_error,
            low_precision,
        }
    }
}

/// Runs `trials` draws of `sample`, which returns `(X_n, Σ_{i≠n} |I_ni|²)`
/// for each of `num_users` users, and assembles the reports.
pub fn evaluate_sinr_se<F>(
    num_users: usize,
    trials: usize,
    noise: f64,
    prelog: f64,
    mut sample: F,
) -> Result<Vec<SeReport>>
where
    F: FnMut(usize) -> Result<Vec<(C64, f64)>>,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let mut accs = vec![UserAccumulator::new(trials); num_users];
    for t in 0..trials {
        let terms = sample(t)?;
        if terms.len() != num_users {
            return Err(Error::InvalidArgument(format!(
                "trial {t} produced {} users, expected {num_users}",
                terms.len()
            )));
        }
        for (acc, (s, i)) in accs.iter_mut().zip(terms) {
            acc.push(t, s, i);
        }
    }
    Ok(accs
        .iter()
        .enumerate()
        .map(|(n, a)| SeReport::from_accumulator(n, a, noise, prelog))
        .collect())
}
