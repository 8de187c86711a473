//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every tolerance is pinned below.

use leo_dmimo::channel::*;
use leo_dmimo::clustering::*;
use leo_dmimo::downlink::*;
use leo_dmimo::estimation::*;
use leo_dmimo::geometry::Snapshot;
use leo_dmimo::harness::run::{setup_drop, DropScores};
use leo_dmimo::harness::{run, CsiMode, ExperimentConfig, ExperimentResult};
use leo_dmimo::pilots::PilotBook;
use leo_dmimo::{stats, CMatrix, CVector, C64};
use leo_dmimo_validation::{check_constraints, reference_config, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

const RUNTIME_LIMIT_S: f64 = 600.0;
const UC_FC_RATIO_MIN: f64 = 0.85;
const UC_NCT_RATIO_MIN: f64 = 1.5;
const DOMINANCE_MASS_MAX: f64 = 0.01;
const CROSSOVER_TOL: f64 = 0.25;
const MIN_USER_DROPS: usize = 100;
const ORTHOGONALITY_TOL: f64 = 0.03;
const ESTIMATION_DRAWS: usize = 100_000;
const SCALAR_ORACLE_TOL: f64 = 1e-10;
const FSPL_TOL_DB: f64 = 1e-9;
const PHASE_MODULUS_TOL: f64 = 4.0 * f64::EPSILON;
const TRACE_TOL: f64 = 1e-12;
const COVARIANCE_TOL: f64 = 0.03;
const COVARIANCE_DRAWS: usize = 100_000;
const SAFETY_EPOCHS: usize = 120;
const SAFETY_STEP_S: f64 = 30.0;
const SINR_ORACLE_TOL: f64 = 0.02;
const SINR_ORACLE_TRIALS: usize = 10_000;

const CRITERIA: [RsapCriterion; 2] = [RsapCriterion::BestChannel, RsapCriterion::MaxServiceTime];

/// Sub-checks of one criterion; the criterion passes if all of them do.
#[derive(Default)]
struct Parts(Vec<(bool, String)>);

impl Parts {
    fn push(&mut self, ok: bool, text: String) {
        self.0.push((ok, text));
    }

    fn verdict(self, id: &str, name: &str) -> Verdict {
        let passed = !self.0.is_empty() && self.0.iter().all(|(ok, _)| *ok);
        let detail = self
            .0
            .iter()
            .map(|(ok, t)| format!("{}{t}", if *ok { "" } else { "✗ " }))
            .collect::<Vec<_>>()
            .join("; ");
        Verdict::new(id, name, passed, detail)
    }
}

fn se(r: &ExperimentResult, policy: ClusterPolicy, c: RsapCriterion, mode: PrecoderMode) -> Vec<f64> {
    r.se_samples(policy, c, mode, CsiMode::Lmmse)
}

fn uc_only(mut cfg: ExperimentConfig, satellites: usize, antennas: usize) -> ExperimentConfig {
    cfg.geometry.num_satellites = satellites;
    cfg.geometry.num_planes = None;
    cfg.radio.antennas_per_sat = antennas;
    cfg.policy.clusters = vec![ClusterPolicy::Uc];
    // SE comparisons only; the epoch loop is covered by the reference run
    cfg.monte_carlo.horizon_s = 0.0;
    cfg.resolved()
}

fn policy_ordering(r: &ExperimentResult, elapsed: f64) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    let mode = PrecoderMode::PhaseAware;
    for c in CRITERIA {
        let uc = stats::mean(&se(r, ClusterPolicy::Uc, c, mode))?;
        let fc = stats::mean(&se(r, ClusterPolicy::Fc, c, mode))?;
        let nct = stats::mean(&se(r, ClusterPolicy::Nct, c, mode))?;
        let ok = nct < uc && uc <= fc && uc >= UC_FC_RATIO_MIN * fc && uc >= UC_NCT_RATIO_MIN * nct;
        parts.push(
            ok,
            format!(
                "{}: NCT {nct:.3e} UC {uc:.3e} FC {fc:.3e} (UC/FC {:.3}, UC/NCT {:.3})",
                c.as_str(),
                uc / fc,
                uc / nct
            ),
        );
    }
    parts.push(elapsed < RUNTIME_LIMIT_S, format!("reference run {elapsed:.1} s"));
    Ok(parts.verdict("1", "policy ordering NCT < UC ≤ FC"))
}

fn phase_compensation(by_l: &[(usize, &ExperimentResult)]) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for &(l, r) in by_l {
        for c in CRITERIA {
            let pa = se(r, ClusterPolicy::Uc, c, PrecoderMode::PhaseAware);
            let asy = se(r, ClusterPolicy::Uc, c, PrecoderMode::Asynchronous);
            let mass = stats::dominance_violation(&pa, &asy)?;
            let peak = stats::max_cdf_excess(&pa, &asy)?;
            parts.push(
                mass <= DOMINANCE_MASS_MAX,
                format!("L={l} {}: violation mass {mass:.2e}, peak excess {peak:.3}", c.as_str()),
            );
        }
    }
    Ok(parts.verdict("2", "phase-aware SE dominates asynchronous"))
}

fn crossover(l2: &ExperimentResult, l4: &ExperimentResult) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for c in CRITERIA {
        let sync = stats::median(&se(l2, ClusterPolicy::Uc, c, PrecoderMode::PhaseAware))?;
        let async4 = stats::median(&se(l4, ClusterPolicy::Uc, c, PrecoderMode::Asynchronous))?;
        let rel = sync / async4 - 1.0;
        parts.push(
            rel.abs() <= CROSSOVER_TOL,
            format!(
                "{}: L=2 PA {sync:.3e} vs L=4 async {async4:.3e} ({:+.1}%)",
                c.as_str(),
                100.0 * rel
            ),
        );
    }
    Ok(parts.verdict("3", "M=400 cross-over of L=2 phase-aware and L=4 asynchronous"))
}

fn density(sparse: &ExperimentResult, dense: &ExperimentResult) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for c in CRITERIA {
        for mode in [PrecoderMode::PhaseAware, PrecoderMode::Asynchronous] {
            let m100 = stats::median(&se(sparse, ClusterPolicy::Uc, c, mode))?;
            let m400 = stats::median(&se(dense, ClusterPolicy::Uc, c, mode))?;
            parts.push(
                m400 > m100,
                format!("{} {}: M=100 {m100:.3e} M=400 {m400:.3e}", c.as_str(), mode.as_str()),
            );
        }
    }
    Ok(parts.verdict("4", "UC median SE grows with constellation density"))
}

fn cluster_separation(r: &ExperimentResult) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for c in CRITERIA {
        let uc = r.cluster_size_samples(ClusterPolicy::Uc, c);
        let fc = r.cluster_size_samples(ClusterPolicy::Fc, c);
        let uc_max = uc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let uc_mean = stats::mean(&uc)?;
        let fc_mean = stats::mean(&fc)?;
        parts.push(
            uc_max < fc_mean,
            format!(
                "{}: UC max {uc_max} mean {uc_mean:.2}, FC mean {fc_mean:.2}",
                c.as_str()
            ),
        );
    }
    Ok(parts.verdict("5", "UC cluster sizes below FC mean"))
}

fn coverage(r: &ExperimentResult) -> Result<Verdict, leo_dmimo::Error> {
    let step = r.config().monte_carlo.epoch_step_s;
    let mut parts = Parts::default();
    let bc = r.coverage_samples(RsapCriterion::BestChannel);
    let mst = r.coverage_samples(RsapCriterion::MaxServiceTime);
    let (m_bc, m_mst) = (stats::median(&bc)?, stats::median(&mst)?);
    parts.push(
        m_mst >= m_bc && bc.len() >= MIN_USER_DROPS && mst.len() >= MIN_USER_DROPS,
        format!(
            "median max_service_time {m_mst:.0} s vs best_channel {m_bc:.0} s over {}/{} user-drops",
            mst.len(),
            bc.len()
        ),
    );
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let mut closed = 0;
    for s in r
        .coverage
        .iter()
        .filter(|s| s.criterion == RsapCriterion::MaxServiceTime)
    {
        let zeta = s.service_time_at_start;
        let ok = if s.truncated {
            // the RSAP was still up at the last epoch
            zeta >= s.duration - step
        } else {
            closed += 1;
            worst = worst.max((s.duration - zeta).abs());
            (s.duration - zeta).abs() <= step
        };
        if !ok {
            bad += 1;
        }
    }
    parts.push(
        bad == 0 && closed > 0,
        format!("{bad} users off ζ by more than {step} s; {closed} closed intervals, worst gap {worst:.1} s"),
    );
    Ok(parts.verdict("6", "coverage time ordering and ζ at formation"))
}

/// Two users on pilot 0 (the second one optional) and one user on pilot 1,
/// all seen by one `L`-antenna satellite.
struct PilotCell {
    l: usize,
    betas: [f64; 3],
    kappas: [f64; 3],
    los: [CVector; 3],
    corr: [CMatrix; 3],
    theta: [C64; 3],
    noise: f64,
    book: PilotBook,
}

const CELL_TAU_P: usize = 4;

impl PilotCell {
    fn new(l: usize, betas: [f64; 3], noise: f64) -> Self {
        // the contaminating user has zero-mean fading
        let kappas = [10.0, 0.0, 10.0];
        let los = [0.4, 1.9, 3.3].map(|a| los_steering(a, l, 0.5, 1.0));
        let corr = [0, 1, 2].map(|i| correlation_matrix(betas[i], kappas[i], &los[i]));
        let mut book = PilotBook::new(CELL_TAU_P);
        book.set_pilot(0, 0).expect("pilot");
        book.set_pilot(1, 0).expect("pilot");
        book.set_pilot(2, 1).expect("pilot");
        Self {
            l,
            betas,
            kappas,
            los,
            corr,
            theta: [
                phase_shift(3.1e-7, 1e-6),
                phase_shift(-1.3e-7, 1e-6),
                phase_shift(0.0, 1e-6),
            ],
            noise,
            book,
        }
    }

    fn residual(&self, seed: u64) -> Result<f64, leo_dmimo::Error> {
        let est = LmmseEstimator::new(
            LinkStatistics {
                correlation: &self.corr[0],
                power: 1.0,
                served: true,
            },
            &[LinkStatistics {
                correlation: &self.corr[1],
                power: 1.0,
                served: self.betas[1] > 0.0,
            }],
            CELL_TAU_P,
            self.noise,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cross = CMatrix::zeros(self.l, self.l);
        for _ in 0..ESTIMATION_DRAWS {
            let h: Vec<CVector> = (0..3)
                .map(|i| {
                    let nlos = CVector::from_fn(self.l, |_, _| complex_gaussian(&mut rng));
                    mix_small_scale(&self.los[i], &nlos, self.kappas[i]) * C64::from(self.betas[i].sqrt())
                })
                .collect();
            let eff: Vec<CVector> = (0..3).map(|i| &h[i] * self.theta[i]).collect();
            let txs: Vec<PilotTransmission<'_>> = (0..3)
                .map(|i| PilotTransmission {
                    user: i,
                    channel: &eff[i],
                    power: 1.0,
                    served: true,
                })
                .collect();
            let w = pilot_noise(self.l, CELL_TAU_P, self.noise, &mut rng);
            let y = receive_pilots(self.l, &txs, &self.book, Some(&w))?;
            let h_hat = est.estimate(&despread(&y, &self.book.sequence(0)), self.theta[0]);
            cross += (&h[0] - &h_hat) * h_hat.adjoint();
        }
        let cross = cross / C64::from(ESTIMATION_DRAWS as f64);
        Ok(cross.iter().map(|z| z.norm()).fold(0.0, f64::max) / self.betas[0])
    }
}

fn estimator() -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for (label, betas, seed) in [("contaminated", [1.0, 0.4, 2.0], 100), ("clean", [1.0, 0.0, 2.0], 101)] {
        let rel = PilotCell::new(4, betas, 0.5).residual(seed)?;
        parts.push(
            rel < ORTHOGONALITY_TOL,
            format!("{label} residual {:.2}% of β", 100.0 * rel),
        );
    }
    // L = 1 in the noiseless limit against the scalar closed form
    let (b1, b2, p1, p2, tau_p, s2) = (3.2e-13, 1.1e-13, 1.0, 0.5, 30, 1e-30);
    let one = CVector::from_element(1, C64::new(1.0, 0.0));
    let (r1, r2) = (correlation_matrix(b1, 10.0, &one), correlation_matrix(b2, 10.0, &one));
    let theta = phase_shift(2.7e-7, 1e-6);
    let y = C64::new(4.1e-7, -2.3e-7);
    let got = lmmse_estimate(
        &CVector::from_element(1, y),
        LinkStatistics {
            correlation: &r1,
            power: p1,
            served: true,
        },
        &[LinkStatistics {
            correlation: &r2,
            power: p2,
            served: true,
        }],
        theta,
        tau_p,
        s2,
    )?
    .h_hat[0];
    let tp = tau_p as f64;
    let want = y * theta.conj() * ((tp * p1).sqrt() * b1 / (tp * (p1 * b1 + p2 * b2) + s2));
    let rel = (got - want).norm() / want.norm();
    parts.push(
        rel <= SCALAR_ORACLE_TOL,
        format!("scalar oracle relative error {rel:.1e}"),
    );
    Ok(parts.verdict("7", "LMMSE orthogonality and scalar closed form"))
}

fn numerics() -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    let mut fspl: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let f = 10f64.powf(-1.0 + 0.5 * i as f64);
            let r = 10f64.powf(-2.0 + 0.6 * j as f64);
            let want = 32.45 + 20.0 * f.log10() + 20.0 * r.log10();
            fspl = fspl.max((free_space_path_loss(f, r)? - want).abs());
        }
    }
    parts.push(fspl <= FSPL_TOL_DB, format!("FSPL grid max error {fspl:.1e} dB"));

    let boresight = [0.1, 1.0, 10.0, 1e3].iter().all(|&eta| antenna_loss(0.0, eta) == 1.0);
    parts.push(boresight, format!("antenna loss at boresight exactly 1: {boresight}"));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut modulus: f64 = 0.0;
    for _ in 0..10_000 {
        let dt = rng.random_range(-1e-2..1e-2);
        let ts = 10f64.powf(rng.random_range(-9.0..-3.0));
        modulus = modulus.max((phase_shift(dt, ts).norm() - 1.0).abs());
    }
    parts.push(modulus <= PHASE_MODULUS_TOL, format!("| |θ| − 1 | ≤ {modulus:.1e}"));

    let mut trace: f64 = 0.0;
    let mut psd = true;
    let mut hermitian = true;
    for _ in 0..1000 {
        let l = rng.random_range(1..9);
        let beta = 10f64.powf(rng.random_range(-20.0..0.0));
        let k = rng.random_range(0.0..100.0);
        let r = correlation_matrix(beta, k, &los_steering(rng.random_range(0.0..6.3), l, 0.5, 1.0));
        hermitian &= r == r.adjoint();
        trace = trace.max((r.trace().re / (beta * l as f64) - 1.0).abs());
        let tr = r.trace().re;
        psd &= r.symmetric_eigenvalues().iter().all(|&e| e >= -TRACE_TOL * tr);
    }
    parts.push(
        hermitian && psd && trace <= TRACE_TOL,
        format!("R Hermitian {hermitian}, PSD {psd}, trace error {trace:.1e}"),
    );

    let beta = 3.7e-13;
    let mut cov: f64 = 0.0;
    for (l, k, aoa, seed) in [(4, 10.0, 0.7, 9), (2, 10.0, 2.1, 10), (4, 0.0, 1.3, 11)] {
        let los = los_steering(aoa, l, 0.5, 1.0);
        let r = correlation_matrix(beta, k, &los);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = CMatrix::zeros(l, l);
        for _ in 0..COVARIANCE_DRAWS {
            let (h, _) = realize_channel(beta, &sample_small_scale(&los, k, &mut rng), C64::new(1.0, 0.0));
            acc += &h * h.adjoint();
        }
        let emp = acc / C64::from(COVARIANCE_DRAWS as f64);
        for (e, want) in emp.iter().zip(r.iter()) {
            // vanishing entries are compared on the diagonal scale
            let scale = if want.norm() > 1e-3 * beta { want.norm() } else { beta };
            cov = cov.max((e - want).norm() / scale);
        }
    }
    parts.push(
        cov < COVARIANCE_TOL,
        format!("sampled covariance within {:.2}% of R", 100.0 * cov),
    );
    Ok(parts.verdict("8", "channel numerics"))
}

fn stepped_safety(cfg: &ExperimentConfig, drop: usize, c: RsapCriterion, tau_p: usize) -> Result<usize, String> {
    let setup = setup_drop(cfg, drop).map_err(|e| e.to_string())?;
    let min_el = cfg.geometry.min_elevation_deg;
    let scores = DropScores::new(&setup, &cfg.radio, min_el);
    let users: Vec<usize> = (0..setup.users.len()).collect();
    let epoch = |k: usize| {
        let time = SAFETY_STEP_S * k as f64;
        let snap = Snapshot::compute(&setup.constellation, &setup.users, setup.start_time + time, min_el);
        Epoch {
            time,
            visibility: snap.visibility,
        }
    };
    let mut book = PilotBook::new(tau_p);
    let first = epoch(0);
    let (mut clusters, _) = initial_access(&users, &first, &scores, &mut book, c).map_err(|e| e.to_string())?;
    check_constraints(&clusters, &first, &book)?;
    for k in 1..=SAFETY_EPOCHS {
        let ep = epoch(k);
        update_clusters(&users, &mut clusters, &ep, &scores, &mut book, c).map_err(|e| e.to_string())?;
        check_constraints(&clusters, &ep, &book)?;
    }
    Ok(SAFETY_EPOCHS + 1)
}

fn clustering_safety(reference: &ExperimentConfig) -> Result<Verdict, leo_dmimo::Error> {
    let mut parts = Parts::default();
    for tau_p in [reference.pilot.tau_p, 2] {
        let mut checked = 0;
        let mut failure = None;
        for drop in 0..5 {
            for c in CRITERIA {
                match stepped_safety(reference, drop, c, tau_p) {
                    Ok(n) => checked += n,
                    Err(e) => failure = failure.or(Some(format!("drop {drop} {}: {e}", c.as_str()))),
                }
            }
        }
        let text = match &failure {
            None => format!("τ_p={tau_p}: {checked} epochs over 60 min clean"),
            Some(e) => format!("τ_p={tau_p}: {e}"),
        };
        parts.push(failure.is_none(), text);
    }
    let mut cfg = reference.clone();
    cfg.monte_carlo.num_drops = 4;
    cfg.monte_carlo.trials_per_drop = 2;
    let a = serde_json::to_string(&run(&cfg)?.events).expect("serializable");
    let b = serde_json::to_string(&run(&cfg)?.events).expect("serializable");
    parts.push(
        a == b && a.len() > 2,
        format!("event log of {} bytes identical across reruns: {}", a.len(), a == b),
    );
    Ok(parts.verdict("9", "clustering safety and reproducible event log"))
}

fn degenerate_sinr() -> Result<Verdict, leo_dmimo::Error> {
    let radio = RadioConfig::default();
    let large = large_scale_with_shadow(900e3, 0.01, 0.0, &radio)?;
    // κ → ∞ leaves only the LoS term, so the fading is frozen
    let frozen = RadioConfig {
        rician_k: 1e15,
        ..radio.clone()
    };
    let state = ChannelState::new(large, 0.8, &frozen);
    let l = frozen.antennas_per_sat;
    let sat = 0;
    let mut clusters = Clusters::new();
    clusters.insert(
        0,
        ServingCluster {
            user: 0,
            rsap: sat,
            members: [sat].into(),
            visible: [sat].into(),
            pilot: 0,
            formed_at: 0.0,
        },
    );
    let tr = state.correlation.trace().re;
    let p_max = frozen.max_tx_power_w();
    let power = allocate_power(&clusters, |_, _| tr, p_max);
    let noise = frozen.noise_power_w();
    let theta = C64::new(1.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let reports = evaluate_sinr_se(1, SINR_ORACLE_TRIALS, noise, 1.0, |_| {
        let nlos = CVector::from_fn(l, |_, _| complex_gaussian(&mut rng));
        let h = state.realize(&nlos);
        let v = make_precoder(&h, theta, PrecoderMode::PhaseAware);
        let channels = vec![BTreeMap::from([(sat, &h * theta)])];
        let precoders = vec![BTreeMap::from([(sat, v)])];
        Ok(received_terms(&channels, &precoders, &power))
    })?;
    let want = p_max * state.beta() * l as f64 / noise;
    let got = reports[0].sinr;
    let rel = got / want - 1.0;
    let mut parts = Parts::default();
    parts.push(
        rel.abs() <= SINR_ORACLE_TOL,
        format!("Monte Carlo {got:.4e} vs P·β·L/σ² {want:.4e} ({:+.2e})", rel),
    );
    Ok(parts.verdict("10", "single-link SINR closed form"))
}

fn record(out: &mut Vec<Verdict>, id: &str, name: &str, v: Result<Verdict, leo_dmimo::Error>) {
    let v = v.unwrap_or_else(|e| Verdict::error(id, name, e));
    println!("{v}");
    out.push(v);
}

fn main() {
    let mut out = Vec::new();
    let reference = reference_config();

    record(&mut out, "7", "LMMSE estimator", estimator());
    record(&mut out, "8", "channel numerics", numerics());
    record(&mut out, "10", "single-link SINR", degenerate_sinr());
    record(&mut out, "9", "clustering safety", clustering_safety(&reference));

    let started = Instant::now();
    let base = run(&reference);
    let elapsed = started.elapsed().as_secs_f64();
    let runs = base.and_then(|base| {
        let l2 = run(&uc_only(reference.clone(), 100, 2))?;
        let dense_l2 = run(&uc_only(reference.clone(), 400, 2))?;
        let dense_l4 = run(&uc_only(reference.clone(), 400, 4))?;
        Ok((base, l2, dense_l2, dense_l4))
    });
    match runs {
        Ok((base, l2, dense_l2, dense_l4)) => {
            record(&mut out, "1", "policy ordering", policy_ordering(&base, elapsed));
            record(
                &mut out,
                "2",
                "phase compensation",
                phase_compensation(&[(2, &l2), (4, &base)]),
            );
            record(&mut out, "3", "cross-over", crossover(&dense_l2, &dense_l4));
            record(&mut out, "4", "density scaling", density(&base, &dense_l4));
            record(&mut out, "5", "cluster sizes", cluster_separation(&base));
            record(&mut out, "6", "coverage", coverage(&base));
        }
        Err(e) => {
            for (id, name) in [
                ("1", "policy ordering"),
                ("2", "phase compensation"),
                ("3", "cross-over"),
                ("4", "density scaling"),
                ("5", "cluster sizes"),
                ("6", "coverage"),
            ] {
                let v = Verdict::error(id, name, &e);
                println!("{v}");
                out.push(v);
            }
        }
    }

    let failed: Vec<&str> = out.iter().filter(|v| !v.passed).map(|v| v.id.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed",
        out.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        println!("failing criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
