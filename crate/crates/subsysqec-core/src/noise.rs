//! Asymmetric stochastic Pauli error model over circuit fault locations.
//!
//! Every fault-eligible location fails independently: each qubit in its
//! support picks up a Z error with probability `p_z` and, independently, an
//! X error with probability `p_x` (both firing gives Y with probability
//! `p_z * p_x`). The asymmetry `alpha = p_z / p_x` is the same for all
//! locations unless per-kind overrides are installed for sensitivity
//! studies. Faults apply after the location's ideal action, except at
//! measurements, where the channel precedes the readout (an X before a
//! Z-measurement is the classical flip; no separate readout error exists).
//! Classically controlled frame corrections are not fault locations.
//!
//! Sampling walks the flat per-qubit slot space with geometric jumps, so the
//! cost is proportional to the number of faults drawn, not to circuit size,
//! while remaining an exact independent-Bernoulli sample per slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Location};

/// Per-location asymmetric Pauli channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_z: f64,
    pub p_x: f64,
    /// Optional per-kind overrides `(kind name, p_z, p_x)`.
    pub overrides: Vec<(String, f64, f64)>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::from_rates(0.0, 0.0)
    }

    pub fn from_rates(p_z: f64, p_x: f64) -> Self {
        assert!((0.0..=1.0).contains(&p_z) && (0.0..=1.0).contains(&p_x));
        Self { p_z, p_x, overrides: Vec::new() }
    }

    /// Builds from `p_z` and `alpha = p_z / p_x`.
    pub fn from_alpha(p_z: f64, alpha: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        Self::from_rates(p_z, p_z / alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.p_z / self.p_x
    }

    fn rates_for(&self, loc: &Location) -> (f64, f64) {
        if self.overrides.is_empty() {
            return (self.p_z, self.p_x);
        }
        let name = loc.kind_name();
        self.overrides
            .iter()
            .find(|(k, _, _)| k == name)
            .map(|&(_, z, x)| (z, x))
            .unwrap_or((self.p_z, self.p_x))
    }
}

/// One sampled fault: site index plus the X/Z components on each support
/// qubit. Events are ordered by site, which is time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub site: u32,
    /// X and Z components for support qubit 0 and (for CNOTs) qubit 1.
    pub x: [bool; 2],
    pub z: [bool; 2],
}

impl FaultEvent {
    pub fn is_identity(&self) -> bool {
        !(self.x[0] | self.x[1] | self.z[0] | self.z[1])
    }
}

/// A set of non-identity faults assigned to distinct locations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultAssignment {
    pub events: Vec<FaultEvent>,
}

impl FaultAssignment {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(site: u32, x: [bool; 2], z: [bool; 2]) -> Self {
        Self { events: vec![FaultEvent { site, x, z }] }
    }
}

/// Geometric-jump walk: yields each index of `0..len` independently with
/// probability `p`, consuming one RNG draw per hit (plus one to terminate).
fn sample_hits(len: u64, p: f64, rng: &mut impl Rng, mut hit: impl FnMut(u64)) {
    if p <= 0.0 || len == 0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..len {
            hit(i);
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut cursor = 0u64;
    loop {
        let u: f64 = rng.gen();
        let jump = ((1.0 - u).ln() / log_q).floor();
        // Jump can exceed u64 range for tiny p; clamp through f64 compare.
        if jump >= (len - cursor) as f64 {
            return;
        }
        cursor += jump as u64;
        hit(cursor);
        cursor += 1;
        if cursor >= len {
            return;
        }
    }
}

/// Samples a fault assignment for the circuit's noise window.
///
/// Reuses `out` to avoid per-trial allocation; the result is sorted by site.
pub fn sample_faults_into(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut impl Rng,
    out: &mut FaultAssignment,
) {
    out.events.clear();
    if !model.overrides.is_empty() {
        sample_with_overrides(circuit, model, rng, out);
        return;
    }
    let len = circuit.slot_map.len() as u64;
    // Two independent passes over the slot space, Z then X; a slot hit by
    // both carries a Y.
    let mut hits: Vec<(u32, bool)> = Vec::new(); // (slot, is_x)
    sample_hits(len, model.p_z, rng, |s| hits.push((s as u32, false)));
    sample_hits(len, model.p_x, rng, |s| hits.push((s as u32, true)));
    if hits.is_empty() {
        return;
    }
    hits.sort_unstable_by_key(|&(s, _)| s);
    for (slot, is_x) in hits {
        let (site, sub) = circuit.slot_map[slot as usize];
        match out.events.last_mut() {
            Some(ev) if ev.site == site => {
                if is_x {
                    ev.x[sub as usize] ^= true;
                } else {
                    ev.z[sub as usize] ^= true;
                }
            }
            _ => {
                let mut ev = FaultEvent { site, x: [false; 2], z: [false; 2] };
                if is_x {
                    ev.x[sub as usize] = true;
                } else {
                    ev.z[sub as usize] = true;
                }
                out.events.push(ev);
            }
        }
    }
    out.events.retain(|ev| !ev.is_identity());
}

pub fn sample_faults(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut impl Rng,
) -> FaultAssignment {
    let mut out = FaultAssignment::empty();
    sample_faults_into(circuit, model, rng, &mut out);
    out
}

/// Slow per-site path honouring per-kind overrides.
fn sample_with_overrides(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut impl Rng,
    out: &mut FaultAssignment,
) {
    for (idx, site) in circuit.fault_sites.iter().enumerate() {
        let loc = &circuit.moments[site.moment as usize].locations[site.loc as usize];
        let (pz, px) = model.rates_for(loc);
        let mut ev = FaultEvent { site: idx as u32, x: [false; 2], z: [false; 2] };
        for sub in 0..site.support() {
            ev.z[sub] = rng.gen_bool(pz);
            ev.x[sub] = rng.gen_bool(px);
        }
        if !ev.is_identity() {
            out.events.push(ev);
        }
    }
}

/// Enumerates every single-fault assignment: all 3 non-identity Paulis per
/// one-qubit location, all 15 per CNOT, tagged by a stable id.
pub fn enumerate_single_faults(circuit: &Circuit) -> impl Iterator<Item = (u64, FaultAssignment)> + '_ {
    circuit.fault_sites.iter().enumerate().flat_map(|(idx, site)| {
        let combos: &'static [((bool, bool), (bool, bool))] = if site.q1.is_some() {
            &TWO_QUBIT_COMBOS
        } else {
            &ONE_QUBIT_COMBOS
        };
        combos.iter().enumerate().map(move |(c, &((x0, z0), (x1, z1)))| {
            let id = (idx as u64) << 8 | c as u64;
            (id, FaultAssignment::single(idx as u32, [x0, x1], [z0, z1]))
        })
    })
}

/// (x, z) per qubit; (false,false) is I, (true,true) is Y.
const ONE_QUBIT_COMBOS: [((bool, bool), (bool, bool)); 3] = [
    ((true, false), (false, false)),
    ((false, true), (false, false)),
    ((true, true), (false, false)),
];

const TWO_QUBIT_COMBOS: [((bool, bool), (bool, bool)); 15] = [
    ((false, false), (true, false)),
    ((false, false), (false, true)),
    ((false, false), (true, true)),
    ((true, false), (false, false)),
    ((true, false), (true, false)),
    ((true, false), (false, true)),
    ((true, false), (true, true)),
    ((false, true), (false, false)),
    ((false, true), (true, false)),
    ((false, true), (false, true)),
    ((false, true), (true, true)),
    ((true, true), (false, false)),
    ((true, true), (true, false)),
    ((true, true), (false, true)),
    ((true, true), (true, true)),
];

/// Total number of single-fault assignments for a circuit.
pub fn single_fault_count(circuit: &Circuit) -> usize {
    circuit.single_fault_count()
}
