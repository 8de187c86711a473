//! Seeded drop loop.
//!
//! Every drop owns a ChaCha8 generator keyed by `(seed, drop)`. Stream 0
//! draws the geometry, shadowing and arrival angles; stream `t + 1` draws
//! the small-scale fading and receiver noise of trial `t`. The draws do not
//! depend on the policy, criterion, precoder or CSI mode being evaluated,
//! so all of those are compared on identical realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use super::config::{CsiMode, ExperimentConfig};
use super::records::{
    ClusterHistogramRecord, ClusterSizeRecord, CoverageRecord, EventRecord, ExperimentResult, SeRecord,
};
use crate::channel::{
    complex_gaussian, large_scale_with_shadow, phase_shift, sample_shadowing, ChannelState, RadioConfig,
};
use crate::clustering::{
    baseline_clusters, simulate_epochs, ClusterPolicy, Clusters, Epoch, LinkScores, RsapCriterion,
};
use crate::downlink::{
    allocate_power, make_precoder, prelog, received_terms, PowerAllocation, PrecoderMode, SeReport, UserAccumulator,
};
use crate::error::Result;
use crate::estimation::{despread, pilot_noise, receive_pilots, LinkStatistics, LmmseEstimator, PilotTransmission};
use crate::geometry::{
    boresight_angle, elevation_angle, place_users, propagate, service_time, Constellation, GroundUser, Orbit, Snapshot,
    SPEED_OF_LIGHT_M_S,
};
use crate::pilots::{pilot_sequence, PilotBook};
use crate::{CMatrix, CVector, C64};

/// Satellites below the local horizon are blocked by the Earth.
const HORIZON_DEG: f64 = 0.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for substream `stream` of drop `drop`.
pub fn drop_rng(seed: u64, drop: usize, stream: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(drop as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Per-drop randomness that stays fixed over trials and epochs.
#[derive(Clone, Debug)]
pub struct DropSetup {
    /// Absolute orbit time of the drop's first snapshot.
    pub start_time: f64,
    pub constellation: Constellation,
    pub users: Vec<GroundUser>,
    /// `[user][sat]`, dB.
    pub shadow_db: Vec<Vec<f64>>,
    /// `[user][sat]`, radians.
    pub aoa: Vec<Vec<f64>>,
}

pub fn setup_drop(cfg: &ExperimentConfig, drop: usize) -> Result<DropSetup> {
    let g = &cfg.geometry;
    let mut rng = drop_rng(cfg.monte_carlo.seed, drop, 0);
    let constellation = Constellation::from_config(g, &mut rng)?;
    let period = Orbit {
        altitude_m: g.altitude_m,
        inclination_deg: g.inclination_deg,
        raan_deg: 0.0,
        phase_deg: 0.0,
    }
    .period_s();
    let start_time = rng.random::<f64>() * period;
    let users = place_users(&g.user_region, g.num_users, &mut rng);
    let m = constellation.len();
    let shadow_db = (0..users.len())
        .map(|_| {
            (0..m)
                .map(|_| sample_shadowing(&mut rng, cfg.radio.shadowing_var_db))
                .collect()
        })
        .collect();
    let aoa = (0..users.len())
        .map(|_| (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect())
        .collect();
    Ok(DropSetup {
        start_time,
        constellation,
        users,
        shadow_db,
        aoa,
    })
}

/// RSAP scores for one drop; times are relative to the drop start.
pub struct DropScores<'a> {
    setup: &'a DropSetup,
    radio: &'a RadioConfig,
    min_elevation_deg: f64,
    zeta: RefCell<HashMap<(u64, usize, usize), f64>>,
}

impl<'a> DropScores<'a> {
    pub fn new(setup: &'a DropSetup, radio: &'a RadioConfig, min_elevation_deg: f64) -> Self {
        Self {
            setup,
            radio,
            min_elevation_deg,
            zeta: RefCell::new(HashMap::new()),
        }
    }

    pub fn average_gain(&self, time: f64, user: usize, sat: usize) -> f64 {
        let t = self.setup.start_time + time;
        let s = propagate(&self.setup.constellation.satellites[sat], t);
        let u = self.setup.users[user].cartesian();
        let r = (s - u).norm();
        large_scale_with_shadow(r, boresight_angle(&s, &u), self.setup.shadow_db[user][sat], self.radio)
            .map_or(0.0, |l| l.beta)
    }

    pub fn service_time(&self, time: f64, user: usize, sat: usize) -> f64 {
        let key = (time.to_bits(), user, sat);
        if let Some(&z) = self.zeta.borrow().get(&key) {
            return z;
        }
        let z = service_time(
            &self.setup.users[user],
            &self.setup.constellation.satellites[sat],
            self.setup.start_time + time,
            self.min_elevation_deg,
        )
        .unwrap_or(0.0);
        self.zeta.borrow_mut().insert(key, z);
        z
    }
}

impl LinkScores for DropScores<'_> {
    fn score(&self, time: f64, user: usize, sat: usize, criterion: RsapCriterion) -> f64 {
        match criterion {
            RsapCriterion::BestChannel => self.average_gain(time, user, sat),
            RsapCriterion::MaxServiceTime => self.service_time(time, user, sat),
        }
    }
}

/// Channels of every unblocked link at the drop start.
pub struct LinkSet {
    /// `[user]` → satellite → statistics.
    pub states: Vec<BTreeMap<usize, ChannelState>>,
    /// `[user][sat]` slant ranges.
    pub ranges_m: Vec<Vec<f64>>,
    /// Satellites with at least one link, ascending.
    pub satellites: Vec<usize>,
}

impl LinkSet {
    pub fn build(setup: &DropSetup, snapshot: &Snapshot, radio: &RadioConfig) -> Result<Self> {
        let mut states = Vec::with_capacity(setup.users.len());
        let mut sats = std::collections::BTreeSet::new();
        for n in 0..setup.users.len() {
            let mut row = BTreeMap::new();
            for m in snapshot.visible_at(n, HORIZON_DEG) {
                let large = large_scale_with_shadow(
                    snapshot.ranges_m[n][m],
                    snapshot.boresight_rad[n][m],
                    setup.shadow_db[n][m],
                    radio,
                )?;
                row.insert(m, ChannelState::new(large, setup.aoa[n][m], radio));
                sats.insert(m);
            }
            states.push(row);
        }
        Ok(Self {
            states,
            ranges_m: snapshot.ranges_m.clone(),
            satellites: sats.into_iter().collect(),
        })
    }
}

/// One cluster configuration evaluated in a drop.
pub struct Scenario {
    pub policy: ClusterPolicy,
    pub criterion: RsapCriterion,
    pub clusters: Clusters,
    pub book: PilotBook,
    /// `[user]` → satellite → `θ_nm` relative to the user's RSAP.
    pub theta: Vec<BTreeMap<usize, C64>>,
    pub estimators: BTreeMap<(usize, usize), LmmseEstimator>,
    /// Users served by each satellite, ascending.
    pub served: BTreeMap<usize, Vec<usize>>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        cfg: &ExperimentConfig,
        snapshot: &Snapshot,
        links: &LinkSet,
        scores: &dyn LinkScores,
        policy: ClusterPolicy,
        criterion: RsapCriterion,
    ) -> Result<Self> {
        let n_users = snapshot.num_users();
        let users: Vec<usize> = (0..n_users).collect();
        let threshold = match policy {
            ClusterPolicy::Fc => HORIZON_DEG,
            _ => cfg.geometry.min_elevation_deg,
        };
        let epoch = Epoch {
            time: 0.0,
            visibility: (0..n_users).map(|n| snapshot.visible_at(n, threshold)).collect(),
        };
        let mut book = PilotBook::new(cfg.pilot.tau_p);
        let (clusters, _) = baseline_clusters(&users, &epoch, scores, &mut book, criterion, policy)?;

        let ts = cfg.radio.symbol_duration();
        let theta = (0..n_users)
            .map(|n| {
                let rsap = clusters.get(&n).map(|c| c.rsap);
                links.states[n]
                    .keys()
                    .map(|&m| {
                        let t = match rsap {
                            Some(r) => {
                                let dt = (links.ranges_m[n][m] - links.ranges_m[n][r]) / SPEED_OF_LIGHT_M_S;
                                phase_shift(dt, ts)
                            }
                            None => C64::new(1.0, 0.0),
                        };
                        (m, t)
                    })
                    .collect()
            })
            .collect();

        let mut served: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for c in clusters.values() {
            for &m in &c.members {
                served.entry(m).or_default().push(c.user);
            }
        }
        let p = cfg.radio.pilot_power_w();
        let noise = cfg.radio.noise_power_w();
        let mut estimators = BTreeMap::new();
        for c in clusters.values() {
            for &m in &c.members {
                let own = LinkStatistics {
                    correlation: &links.states[c.user][&m].correlation,
                    power: p,
                    served: true,
                };
                let co: Vec<LinkStatistics<'_>> = served[&m]
                    .iter()
                    .filter(|&&j| j != c.user && book.pilot_of(j) == Some(c.pilot))
                    .map(|&j| LinkStatistics {
                        correlation: &links.states[j][&m].correlation,
                        power: p,
                        served: true,
                    })
                    .collect();
                let est = LmmseEstimator::new(own, &co, cfg.pilot.tau_p, noise)?;
                estimators.insert((c.user, m), est);
            }
        }
        Ok(Self {
            policy,
            criterion,
            clusters,
            book,
            theta,
            estimators,
            served,
        })
    }

    pub fn power(&self, links: &LinkSet, csi: CsiMode, p_max: f64) -> PowerAllocation {
        allocate_power(
            &self.clusters,
            |n, m| match csi {
                CsiMode::Lmmse => self.estimators[&(n, m)].expected_norm_sq(),
                CsiMode::Perfect => links.states[n][&m].correlation.trace().re,
            },
            p_max,
        )
    }

    pub fn cluster_size(&self, user: usize) -> usize {
        self.clusters.get(&user).map_or(0, |c| c.size())
    }
}

/// Canonical per-trial draws shared by every scenario.
pub struct TrialDraw {
    /// `[user]` → satellite → phase-free channel `h_nm`.
    pub h: Vec<BTreeMap<usize, CVector>>,
    /// Pilot-phase receiver noise per satellite.
    pub noise: BTreeMap<usize, CMatrix>,
}

impl TrialDraw {
    pub fn sample(cfg: &ExperimentConfig, links: &LinkSet, drop: usize, trial: usize) -> Self {
        let mut rng = drop_rng(cfg.monte_carlo.seed, drop, trial as u64 + 1);
        let l = cfg.radio.antennas_per_sat;
        let h = links
            .states
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(&m, st)| {
                        let nlos = CVector::from_fn(l, |_, _| complex_gaussian(&mut rng));
                        (m, st.realize(&nlos))
                    })
                    .collect()
            })
            .collect();
        let var = cfg.radio.noise_power_w();
        let noise = links
            .satellites
            .iter()
            .map(|&m| (m, pilot_noise(l, cfg.pilot.tau_p, var, &mut rng)))
            .collect();
        Self { h, noise }
    }
}

/// Channel estimates of every served link for one trial.
pub fn estimate_trial(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    h_eff: &[BTreeMap<usize, CVector>],
    draw: &TrialDraw,
    csi: CsiMode,
    pilots: &[CVector],
) -> Result<BTreeMap<(usize, usize), CVector>> {
    let mut out = BTreeMap::new();
    match csi {
        CsiMode::Perfect => {
            for c in scenario.clusters.values() {
                for &m in &c.members {
                    out.insert((c.user, m), draw.h[c.user][&m].clone());
                }
            }
        }
        CsiMode::Lmmse => {
            let l = cfg.radio.antennas_per_sat;
            let p = cfg.radio.pilot_power_w();
            for (&m, users) in &scenario.served {
                let txs: Vec<PilotTransmission<'_>> = users
                    .iter()
                    .map(|&j| PilotTransmission {
                        user: j,
                        channel: &h_eff[j][&m],
                        power: p,
                        served: true,
                    })
                    .collect();
                let y = receive_pilots(l, &txs, &scenario.book, draw.noise.get(&m))?;
                for &j in users {
                    let pilot = scenario.clusters[&j].pilot;
                    let yp = despread(&y, &pilots[pilot]);
                    let h_hat = scenario.estimators[&(j, m)].estimate(&yp, scenario.theta[j][&m]);
                    out.insert((j, m), h_hat);
                }
            }
        }
    }
    Ok(out)
}

/// Everything a drop contributes to the result.
#[derive(Clone, Debug, Default)]
pub struct DropOutput {
    pub se: Vec<SeRecord>,
    pub cluster_sizes: Vec<ClusterSizeRecord>,
    pub histograms: Vec<ClusterHistogramRecord>,
    pub coverage: Vec<CoverageRecord>,
    pub events: Vec<EventRecord>,
}

pub fn simulate_drop(cfg: &ExperimentConfig, drop: usize) -> Result<DropOutput> {
    let setup = setup_drop(cfg, drop)?;
    let min_el = cfg.geometry.min_elevation_deg;
    let scores = DropScores::new(&setup, &cfg.radio, min_el);
    let snapshot = Snapshot::compute(&setup.constellation, &setup.users, setup.start_time, min_el);
    let links = LinkSet::build(&setup, &snapshot, &cfg.radio)?;
    let n_users = setup.users.len();
    let pol = &cfg.policy;
    let mut out = DropOutput::default();

    let mut scenarios = Vec::new();
    for &criterion in &pol.criteria {
        for &policy in &pol.clusters {
            let s = Scenario::build(cfg, &snapshot, &links, &scores, policy, criterion)?;
            for n in 0..n_users {
                out.cluster_sizes.push(ClusterSizeRecord {
                    drop,
                    user: n,
                    policy,
                    criterion,
                    size: s.cluster_size(n),
                });
            }
            scenarios.push(s);
        }
    }

    let p_max = cfg.radio.max_tx_power_w();
    let powers: Vec<Vec<PowerAllocation>> = scenarios
        .iter()
        .map(|s| pol.csi.iter().map(|&c| s.power(&links, c, p_max)).collect())
        .collect();
    let trials = cfg.monte_carlo.trials_per_drop;
    let mut accs: Vec<Vec<Vec<Vec<UserAccumulator>>>> =
        vec![
            vec![vec![vec![UserAccumulator::new(trials); n_users]; pol.precoders.len()]; pol.csi.len()];
            scenarios.len()
        ];
    let pilots: Vec<CVector> = (0..cfg.pilot.tau_p)
        .map(|k| pilot_sequence(cfg.pilot.tau_p, k))
        .collect();

    for t in 0..trials {
        let draw = TrialDraw::sample(cfg, &links, drop, t);
        for (si, s) in scenarios.iter().enumerate() {
            let h_eff: Vec<BTreeMap<usize, CVector>> = draw
                .h
                .iter()
                .enumerate()
                .map(|(n, row)| row.iter().map(|(&m, h)| (m, h * s.theta[n][&m])).collect())
                .collect();
            for (ci, &csi) in pol.csi.iter().enumerate() {
                let estimates = estimate_trial(cfg, s, &h_eff, &draw, csi, &pilots)?;
                for (mi, &mode) in pol.precoders.iter().enumerate() {
                    let mut precoders: Vec<BTreeMap<usize, CVector>> = vec![BTreeMap::new(); n_users];
                    for (&(n, m), h_hat) in &estimates {
                        precoders[n].insert(m, make_precoder(h_hat, s.theta[n][&m], mode));
                    }
                    let terms = received_terms(&h_eff, &precoders, &powers[si][ci]);
                    for (n, (sig, intf)) in terms.into_iter().enumerate() {
                        accs[si][ci][mi][n].push(t, sig, intf);
                    }
                }
            }
        }
    }

    let noise = cfg.radio.noise_power_w();
    let pre = prelog(cfg.pilot.tau_p, cfg.pilot.tau_c)?;
    for (si, s) in scenarios.iter().enumerate() {
        for (ci, &csi) in pol.csi.iter().enumerate() {
            for (mi, &mode) in pol.precoders.iter().enumerate() {
                for (n, acc) in accs[si][ci][mi].iter().enumerate() {
                    let r = SeReport::from_accumulator(n, acc, noise, pre);
                    out.se.push(se_record(drop, s, mode, csi, &r));
                }
            }
        }
    }

    if cfg.monte_carlo.horizon_s > 0.0 && pol.clusters.contains(&ClusterPolicy::Uc) {
        let step = cfg.monte_carlo.epoch_step_s;
        let count = (cfg.monte_carlo.horizon_s / step + 1e-9).floor() as usize;
        let users: Vec<usize> = (0..n_users).collect();
        for &criterion in &pol.criteria {
            let epochs = (0..=count).map(|k| {
                let time = k as f64 * step;
                let snap = Snapshot::compute(&setup.constellation, &setup.users, setup.start_time + time, min_el);
                Epoch {
                    time,
                    visibility: snap.visibility,
                }
            });
            let run = simulate_epochs(&users, epochs, &scores, cfg.pilot.tau_p, criterion)?;
            let mut counts = Vec::new();
            for sizes in &run.cluster_sizes {
                for &s in sizes {
                    if counts.len() <= s {
                        counts.resize(s + 1, 0u64);
                    }
                    counts[s] += 1;
                }
            }
            out.histograms.push(ClusterHistogramRecord {
                drop,
                criterion,
                counts,
            });
            out.coverage.extend(run.coverage.iter().map(|c| CoverageRecord {
                drop,
                user: c.user,
                criterion,
                start: c.start,
                duration: c.duration,
                rsap: c.rsap,
                service_time_at_start: c.service_time_at_start,
                truncated: c.truncated,
            }));
            out.events.extend(run.events.iter().map(|e| EventRecord {
                drop,
                criterion,
                time: e.time,
                event: e.kind,
                user: e.user,
                satellite: e.satellite,
            }));
        }
    }
    Ok(out)
}

fn se_record(drop: usize, s: &Scenario, mode: PrecoderMode, csi: CsiMode, r: &SeReport) -> SeRecord {
    SeRecord {
        drop,
        user: r.user,
        policy: s.policy,
        criterion: s.criterion,
        mode,
        csi,
        cluster_size: s.cluster_size(r.user),
        sinr: r.sinr,
        se: r.se,
        coherent_gain: r.coherent_gain,
        beamforming_uncertainty: r.beamforming_uncertainty,
        interference: r.interference,
        noise: r.noise,
        se_std_error: r.se_std_error,
        low_precision: r.low_precision,
    }
}

/// Validates `config`, then simulates every drop in parallel. Drop outputs
/// are concatenated in drop order, so the result does not depend on the
/// thread count.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cfg = config.resolved();
    let drops: Vec<Result<DropOutput>> = (0..cfg.monte_carlo.num_drops)
        .into_par_iter()
        .map(|d| simulate_drop(&cfg, d))
        .collect();
    let mut result = ExperimentResult::empty(&cfg);
    for d in drops {
        let d = d?;
        result.se.extend(d.se);
        result.cluster_sizes.extend(d.cluster_sizes);
        result.histograms.extend(d.histograms);
        result.coverage.extend(d.coverage);
        result.events.extend(d.events);
    }
    Ok(result)
}

/// Elevation of `sat` seen by `user` at `time` seconds after the drop start.
pub fn elevation_at(setup: &DropSetup, user: usize, sat: usize, time: f64) -> Result<f64> {
    let s = propagate(&setup.constellation.satellites[sat], setup.start_time + time);
    elevation_angle(&s, &setup.users[user].cartesian())
}
