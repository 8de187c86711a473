//! User-centric serving clusters.
//!
//! Each user picks a reference satellite (RSAP) that hands out its pilot;
//! every other visible satellite with that pilot still free joins the
//! cluster. Clusters then track the visibility set epoch by epoch, and the
//! user hands over when its RSAP drops below the elevation mask.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::pilots::{PilotBook, PilotGrant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsapCriterion {
    /// Score by large-scale gain `β_nm`.
    BestChannel,
    /// Score by remaining service time `ζ_nm`.
    MaxServiceTime,
}

impl RsapCriterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BestChannel => "best_channel",
            Self::MaxServiceTime => "max_service_time",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterPolicy {
    /// User-centric clusters formed by pilot-gated joins.
    Uc,
    /// Full cooperation: every satellite above the horizon serves the user.
    Fc,
    /// Non-cooperative: the RSAP alone.
    Nct,
}

impl ClusterPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uc => "uc",
            Self::Fc => "fc",
            Self::Nct => "nct",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServingCluster {
    pub user: usize,
    pub rsap: usize,
    /// `A_n`
    pub members: BTreeSet<usize>,
    pub pilot: usize,
    pub formed_at: f64,
    /// `S_n` as last reported to the RSAP.
    pub visible: BTreeSet<usize>,
}

impl ServingCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, sat: usize) -> bool {
        self.members.contains(&sat)
    }
}

pub type Clusters = BTreeMap<usize, ServingCluster>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Join,
    Leave,
    Handover,
    Deny,
    NoCoverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvent {
    pub time: f64,
    pub kind: EventKind,
    pub user: usize,
    pub satellite: Option<usize>,
}

/// Source of the `Λ_nm` scores used to rank candidate reference satellites.
pub trait LinkScores {
    fn score(&self, time: f64, user: usize, sat: usize, criterion: RsapCriterion) -> f64;
}

/// Time-invariant score tables indexed `[user][sat]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    pub average_gain: Vec<Vec<f64>>,
    pub service_time: Vec<Vec<f64>>,
}

impl LinkScores for ScoreTable {
    fn score(&self, _time: f64, user: usize, sat: usize, criterion: RsapCriterion) -> f64 {
        let table = match criterion {
            RsapCriterion::BestChannel => &self.average_gain,
            RsapCriterion::MaxServiceTime => &self.service_time,
        };
        table
            .get(user)
            .and_then(|row| row.get(sat))
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Network state at one epoch: the visibility sets `S_n`, ascending by id.
#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    pub time: f64,
    pub visibility: Vec<Vec<usize>>,
}

/// Arg-max of `Λ_n·` over the candidates; ties go to the lowest satellite id.
pub fn select_rsap(
    user: usize,
    candidates: &[usize],
    scores: &dyn LinkScores,
    time: f64,
    criterion: RsapCriterion,
) -> Result<usize> {
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, f64)> = None;
    for m in sorted {
        let mut s = scores.score(time, user, m, criterion);
        if s.is_nan() {
            s = f64::NEG_INFINITY;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((m, s)),
        }
    }
    best.map(|(m, _)| m).ok_or(Error::NoCoverage(user))
}

/// Runs the per-user access procedure: pick the best candidate RSAP, retry
/// with the next one on denial, then let the remaining visible satellites
/// join if `join_others` and the pilot is free there.
#[allow(clippy::too_many_arguments)]
fn access_one(
    user: usize,
    visible: &[usize],
    time: f64,
    scores: &dyn LinkScores,
    criterion: RsapCriterion,
    book: &mut PilotBook,
    join_others: bool,
    events: &mut Vec<ClusterEvent>,
) -> Result<Option<ServingCluster>> {
    let mut candidates: Vec<usize> = visible.to_vec();
    loop {
        let rsap = match select_rsap(user, &candidates, scores, time, criterion) {
            Ok(m) => m,
            Err(Error::NoCoverage(_)) => {
                events.push(ClusterEvent {
                    time,
                    kind: EventKind::NoCoverage,
                    user,
                    satellite: None,
                });
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        match book.assign_pilot(user, rsap)? {
            PilotGrant::Denied => {
                events.push(ClusterEvent {
                    time,
                    kind: EventKind::Deny,
                    user,
                    satellite: Some(rsap),
                });
                candidates.retain(|&m| m != rsap);
            }
            PilotGrant::Granted(pilot) => {
                events.push(ClusterEvent {
                    time,
                    kind: EventKind::Join,
                    user,
                    satellite: Some(rsap),
                });
                let mut members = BTreeSet::from([rsap]);
                if join_others {
                    for &i in visible {
                        if i != rsap && book.is_free(i, pilot) {
                            book.occupy(i, pilot, user);
                            members.insert(i);
                            events.push(ClusterEvent {
                                time,
                                kind: EventKind::Join,
                                user,
                                satellite: Some(i),
                            });
                        }
                    }
                }
                return Ok(Some(ServingCluster {
                    user,
                    rsap,
                    members,
                    pilot,
                    formed_at: time,
                    visible: visible.iter().copied().collect(),
                }));
            }
        }
    }
}

/// Initial access and cluster selection for every user, in ascending id order.
pub fn initial_access(
    users: &[usize],
    epoch: &Epoch,
    scores: &dyn LinkScores,
    book: &mut PilotBook,
    criterion: RsapCriterion,
) -> Result<(Clusters, Vec<ClusterEvent>)> {
    let mut order = users.to_vec();
    order.sort_unstable();
    let mut clusters = Clusters::new();
    let mut events = Vec::new();
    for n in order {
        if let Some(c) = access_one(
            n,
            &epoch.visibility[n],
            epoch.time,
            scores,
            criterion,
            book,
            true,
            &mut events,
        )? {
            clusters.insert(n, c);
        }
    }
    Ok((clusters, events))
}

/// Cluster update and handover for one new epoch.
///
/// Users without a cluster retry access; failed retries leave no trace.
pub fn update_clusters(
    users: &[usize],
    clusters: &mut Clusters,
    epoch: &Epoch,
    scores: &dyn LinkScores,
    book: &mut PilotBook,
    criterion: RsapCriterion,
) -> Result<Vec<ClusterEvent>> {
    let mut order = users.to_vec();
    order.sort_unstable();
    let time = epoch.time;
    let mut events = Vec::new();
    for n in order {
        let visible_now: BTreeSet<usize> = epoch.visibility[n].iter().copied().collect();
        match clusters.get_mut(&n) {
            Some(c) if visible_now.contains(&c.rsap) => {
                let newly: Vec<usize> = visible_now.difference(&c.visible).copied().collect();
                for i in newly {
                    if !c.members.contains(&i) && book.is_free(i, c.pilot) {
                        book.occupy(i, c.pilot, n);
                        c.members.insert(i);
                        events.push(ClusterEvent {
                            time,
                            kind: EventKind::Join,
                            user: n,
                            satellite: Some(i),
                        });
                    }
                }
                let departed: Vec<usize> = c.members.difference(&visible_now).copied().collect();
                for j in departed {
                    c.members.remove(&j);
                    book.release(j, c.pilot);
                    events.push(ClusterEvent {
                        time,
                        kind: EventKind::Leave,
                        user: n,
                        satellite: Some(j),
                    });
                }
                c.visible = visible_now;
            }
            Some(c) => {
                events.push(ClusterEvent {
                    time,
                    kind: EventKind::Handover,
                    user: n,
                    satellite: Some(c.rsap),
                });
                clusters.remove(&n);
                book.unassign(n);
                if let Some(fresh) = access_one(
                    n,
                    &epoch.visibility[n],
                    time,
                    scores,
                    criterion,
                    book,
                    true,
                    &mut events,
                )? {
                    clusters.insert(n, fresh);
                }
            }
            None => {
                let mut attempt = Vec::new();
                if let Some(fresh) = access_one(
                    n,
                    &epoch.visibility[n],
                    time,
                    scores,
                    criterion,
                    book,
                    true,
                    &mut attempt,
                )? {
                    clusters.insert(n, fresh);
                    events.extend(attempt);
                }
            }
        }
    }
    Ok(events)
}

/// Baseline clusters. `epoch.visibility` must hold the above-horizon sets.
///
/// `Fc` picks the lowest pilot free at every visible satellite so all of
/// them can serve; only when no such pilot exists does it fall back to the
/// pilot-gated procedure. `Nct` stops after the RSAP grant.
pub fn baseline_clusters(
    users: &[usize],
    epoch: &Epoch,
    scores: &dyn LinkScores,
    book: &mut PilotBook,
    criterion: RsapCriterion,
    policy: ClusterPolicy,
) -> Result<(Clusters, Vec<ClusterEvent>)> {
    if policy == ClusterPolicy::Uc {
        return initial_access(users, epoch, scores, book, criterion);
    }
    let mut order = users.to_vec();
    order.sort_unstable();
    let time = epoch.time;
    let mut clusters = Clusters::new();
    let mut events = Vec::new();
    for n in order {
        let visible = &epoch.visibility[n];
        if policy == ClusterPolicy::Fc && !visible.is_empty() {
            let common = (0..book.tau_p()).find(|&p| visible.iter().all(|&m| book.is_free(m, p)));
            if let Some(pilot) = common {
                let rsap = select_rsap(n, visible, scores, time, criterion)?;
                book.set_pilot(n, pilot)?;
                for &m in visible {
                    book.occupy(m, pilot, n);
                    events.push(ClusterEvent {
                        time,
                        kind: EventKind::Join,
                        user: n,
                        satellite: Some(m),
                    });
                }
                clusters.insert(
                    n,
                    ServingCluster {
                        user: n,
                        rsap,
                        members: visible.iter().copied().collect(),
                        pilot,
                        formed_at: time,
                        visible: visible.iter().copied().collect(),
                    },
                );
                continue;
            }
        }
        let join = policy == ClusterPolicy::Fc;
        if let Some(c) = access_one(n, visible, time, scores, criterion, book, join, &mut events)? {
            clusters.insert(n, c);
        }
    }
    Ok((clusters, events))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub user: usize,
    pub start: f64,
    pub duration: f64,
    /// RSAP chosen at the start of the coverage interval.
    pub rsap: usize,
    /// Remaining service time `ζ` of that RSAP when the cluster formed.
    pub service_time_at_start: f64,
    /// No handover happened before the last epoch.
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochRun {
    pub events: Vec<ClusterEvent>,
    /// `[epoch][user]`, `0` for users without a cluster.
    pub cluster_sizes: Vec<Vec<usize>>,
    pub coverage: Vec<CoverageSample>,
    pub epoch_times: Vec<f64>,
}

/// Steps cluster formation and updates over a sequence of epochs and
/// measures, per user, the time from first access to the first handover.
pub fn simulate_epochs<I>(
    users: &[usize],
    epochs: I,
    scores: &dyn LinkScores,
    tau_p: usize,
    criterion: RsapCriterion,
) -> Result<EpochRun>
where
    I: IntoIterator<Item = Epoch>,
{
    let mut book = PilotBook::new(tau_p);
    let mut clusters = Clusters::new();
    let mut run = EpochRun::default();
    let mut open: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut closed: BTreeSet<usize> = BTreeSet::new();
    let mut last_time = None;

    for (k, epoch) in epochs.into_iter().enumerate() {
        let events = if k == 0 {
            let (c, ev) = initial_access(users, &epoch, scores, &mut book, criterion)?;
            clusters = c;
            ev
        } else {
            update_clusters(users, &mut clusters, &epoch, scores, &mut book, criterion)?
        };
        for e in &events {
            if e.kind == EventKind::Handover && !closed.contains(&e.user) {
                if let Some((start, rsap)) = open.remove(&e.user) {
                    run.coverage.push(CoverageSample {
                        user: e.user,
                        start,
                        duration: e.time - start,
                        rsap,
                        service_time_at_start: scores.score(start, e.user, rsap, RsapCriterion::MaxServiceTime),
                        truncated: false,
                    });
                    closed.insert(e.user);
                }
            }
        }
        for (&n, c) in &clusters {
            if !closed.contains(&n) && !open.contains_key(&n) {
                open.insert(n, (c.formed_at, c.rsap));
            }
        }
        run.cluster_sizes.push(
            users
                .iter()
                .map(|n| clusters.get(n).map_or(0, ServingCluster::size))
                .collect(),
        );
        run.events.extend(events);
        run.epoch_times.push(epoch.time);
        last_time = Some(epoch.time);
    }
    if let Some(end) = last_time {
        for (user, (start, rsap)) in open {
            run.coverage.push(CoverageSample {
                user,
                start,
                duration: end - start,
                rsap,
                service_time_at_start: scores.score(start, user, rsap, RsapCriterion::MaxServiceTime),
                truncated: true,
            });
        }
    }
    run.coverage.sort_by_key(|s| s.user);
    Ok(run)
}

/// Per-user coverage time without RSAP handover, truncated at the last epoch.
pub fn coverage_time<I>(
    users: &[usize],
    epochs: I,
    scores: &dyn LinkScores,
    tau_p: usize,
    criterion: RsapCriterion,
) -> Result<Vec<CoverageSample>>
where
    I: IntoIterator<Item = Epoch>,
{
    Ok(simulate_epochs(users, epochs, scores, tau_p, criterion)?.coverage)
}
