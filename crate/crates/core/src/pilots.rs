//! Orthogonal pilot sequences and their per-satellite occupancy.
//!
//! Sequences are scaled DFT columns, `Ξ_k[t] = exp(j·2π·k·t/τ_p)`, so their
//! Gram matrix is exactly `τ_p·I` up to rounding.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

/// Outcome of a pilot request at a reference satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotGrant {
    Granted(usize),
    /// Every pilot index is already in use at that satellite.
    Denied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    tau_p: usize,
    assignment: BTreeMap<usize, usize>,
    occupancy: BTreeMap<usize, Vec<Option<usize>>>,
}

impl PilotBook {
    pub fn new(tau_p: usize) -> Self {
        assert!(tau_p >= 1, "pilot book needs at least one sequence");
        Self {
            tau_p,
            assignment: BTreeMap::new(),
            occupancy: BTreeMap::new(),
        }
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn sequence(&self, index: usize) -> CVector {
        pilot_sequence(self.tau_p, index)
    }

    /// All sequences as columns of a `τ_p × τ_p` matrix.
    pub fn sequences(&self) -> CMatrix {
        CMatrix::from_fn(self.tau_p, self.tau_p, |t, k| dft_entry(self.tau_p, k, t))
    }

    pub fn pilot_of(&self, user: usize) -> Option<usize> {
        self.assignment.get(&user).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<usize, usize> {
        &self.assignment
    }

    pub fn occupant(&self, sat: usize, pilot: usize) -> Option<usize> {
        self.occupancy.get(&sat).and_then(|slots| slots[pilot])
    }

    pub fn is_free(&self, sat: usize, pilot: usize) -> bool {
        self.occupant(sat, pilot).is_none()
    }

    pub fn lowest_free(&self, sat: usize) -> Option<usize> {
        match self.occupancy.get(&sat) {
            None => Some(0),
            Some(slots) => slots.iter().position(Option::is_none),
        }
    }

    /// Marks `pilot` at `sat` as used by `user`. Returns `false` when the
    /// slot already belongs to someone else.
    pub fn occupy(&mut self, sat: usize, pilot: usize, user: usize) -> bool {
        let tau_p = self.tau_p;
        let slots = self.occupancy.entry(sat).or_insert_with(|| vec![None; tau_p]);
        match slots[pilot] {
            Some(u) => u == user,
            None => {
                slots[pilot] = Some(user);
                true
            }
        }
    }

    pub fn release(&mut self, sat: usize, pilot: usize) {
        if let Some(slots) = self.occupancy.get_mut(&sat) {
            slots[pilot] = None;
        }
    }

    /// Gives `user` the lowest pilot index still free at its reference
    /// satellite and reserves it there.
    pub fn assign_pilot(&mut self, user: usize, rsap: usize) -> Result<PilotGrant> {
        if self.assignment.contains_key(&user) {
            return Err(Error::PilotAlreadyAssigned(user));
        }
        match self.lowest_free(rsap) {
            None => Ok(PilotGrant::Denied),
            Some(p) => {
                self.occupy(rsap, p, user);
                self.assignment.insert(user, p);
                Ok(PilotGrant::Granted(p))
            }
        }
    }

    /// Records a pilot chosen by some other rule without reserving any slot.
    pub fn set_pilot(&mut self, user: usize, pilot: usize) -> Result<()> {
        if self.assignment.contains_key(&user) {
            return Err(Error::PilotAlreadyAssigned(user));
        }
        self.assignment.insert(user, pilot);
        Ok(())
    }

    /// Drops the user's pilot and frees every slot it held.
    pub fn unassign(&mut self, user: usize) {
        if self.assignment.remove(&user).is_some() {
            for slots in self.occupancy.values_mut() {
                for s in slots.iter_mut() {
                    if *s == Some(user) {
                        *s = None;
                    }
                }
            }
        }
    }

    /// Users currently holding a slot at `sat`, ascending by pilot index.
    pub fn served_by(&self, sat: usize) -> Vec<(usize, usize)> {
        self.occupancy
            .get(&sat)
            .map(|slots| {
                slots
                    .iter()
                    .enumerate()
                    .filter_map(|(p, u)| u.map(|u| (p, u)))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn co_pilot_set(&self, user: usize) -> Result<Vec<usize>> {
        co_pilot_set(user, &self.assignment)
    }
}

/// `C_n`: every user (including `n`) holding the same pilot index as `n`.
pub fn co_pilot_set(user: usize, assignment: &BTreeMap<usize, usize>) -> Result<Vec<usize>> {
    let p = *assignment.get(&user).ok_or(Error::NoPilot(user))?;
    Ok(assignment.iter().filter(|(_, &q)| q == p).map(|(&u, _)| u).collect())
}

fn dft_entry(tau_p: usize, k: usize, t: usize) -> Complex64 {
    // reduce k·t mod τ_p first so large products keep full phase accuracy
    let m = (k * t) % tau_p;
    Complex64::from_polar(1.0, TAU * m as f64 / tau_p as f64)
}

pub fn pilot_sequence(tau_p: usize, index: usize) -> CVector {
    CVector::from_fn(tau_p, |t, _| dft_entry(tau_p, index, t))
}
