//! Fault-location-level circuit representation with classical feedback.
//!
//! A circuit is a sequence of moments. Each moment holds quantum locations
//! acting on disjoint qubits (the unit of fault injection), followed by
//! classical register assignments, guarded logical-Pauli bookkeeping updates,
//! and optionally a decode step that turns the round's gauge outcomes into a
//! Pauli-frame correction.
//!
//! Conventions baked in here and relied on downstream:
//!
//! - Every live data qubit appears in every noisy moment, receiving an
//!   explicit `Idle` location when nothing else acts on it, so memory noise
//!   is costed. Ancillas idle only between their prep and measurement.
//! - Classically controlled Paulis (`ClassicalPauli`) are frame corrections:
//!   they execute without noise and carry no idle padding of their own.
//! - Registers are single-assignment and may only be read after the moment
//!   that writes them.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub type Qubit = u32;
pub type Reg = u32;
pub type BlockId = u32;

/// Pauli kind applied by a classically controlled correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliKind {
    X,
    Z,
}

/// Classical feedback expressions over outcome registers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassicalExpr {
    Const(bool),
    /// XOR of the named registers.
    Parity(Vec<Reg>),
    /// Majority of the named registers; the set size must be odd.
    Majority(Vec<Reg>),
}

impl ClassicalExpr {
    pub fn regs(&self) -> &[Reg] {
        match self {
            ClassicalExpr::Const(_) => &[],
            ClassicalExpr::Parity(r) | ClassicalExpr::Majority(r) => r,
        }
    }
}

/// A single fault location (or frame correction) in one moment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    Prep0 { q: Qubit },
    PrepPlus { q: Qubit },
    H { q: Qubit },
    X { q: Qubit },
    Z { q: Qubit },
    Cnot { control: Qubit, target: Qubit },
    MeasZ { q: Qubit, out: Reg },
    MeasX { q: Qubit, out: Reg },
    Idle { q: Qubit },
    ClassicalPauli { kind: PauliKind, q: Qubit, guard: ClassicalExpr },
}

impl Location {
    pub fn qubits(&self) -> (Qubit, Option<Qubit>) {
        match *self {
            Location::Prep0 { q }
            | Location::PrepPlus { q }
            | Location::H { q }
            | Location::X { q }
            | Location::Z { q }
            | Location::MeasZ { q, .. }
            | Location::MeasX { q, .. }
            | Location::Idle { q }
            | Location::ClassicalPauli { q, .. } => (q, None),
            Location::Cnot { control, target } => (control, Some(target)),
        }
    }

    /// Frame corrections are noiseless; everything else is a fault location.
    pub fn is_fault_location(&self) -> bool {
        !matches!(self, Location::ClassicalPauli { .. })
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Location::MeasZ { .. } | Location::MeasX { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Location::Prep0 { .. } => "prep0",
            Location::PrepPlus { .. } => "prep+",
            Location::H { .. } => "h",
            Location::X { .. } => "x",
            Location::Z { .. } => "z",
            Location::Cnot { .. } => "cnot",
            Location::MeasZ { .. } => "measz",
            Location::MeasX { .. } => "measx",
            Location::Idle { .. } => "idle",
            Location::ClassicalPauli { .. } => "cpauli",
        }
    }
}

/// Classical register computation, evaluated after the moment's measurements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegAssign {
    pub dst: Reg,
    pub expr: ClassicalExpr,
}

/// Guarded update of the tracked logical Pauli frame of a block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrackedUpdate {
    pub block: BlockId,
    pub pauli: PauliKind,
    pub guard: ClassicalExpr,
}

/// Decode step: reconstruct stabilizer syndromes from gauge outcomes for each
/// repetition round, decode each round, majority-vote the corrections, and
/// apply them in the Pauli frame.
///
/// `z_rounds[r][i]` lists the registers whose XOR is the X-stabilizer bit
/// `S_X_{i+1}` in round `r` (these detect Z errors, corrected per row on
/// column 1); `x_rounds[r][j]` the Z-stabilizer bits (X errors, corrected per
/// column on row 1). The consistency groups each XOR to zero when the
/// round's redundant parity check agrees with the generating set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodeSpec {
    pub block: BlockId,
    pub n1: u16,
    pub n2: u16,
    /// Row-major grid -> qubit snapshot at this point of the circuit.
    pub grid: Vec<Qubit>,
    pub z_rounds: Vec<Vec<Vec<Reg>>>,
    pub x_rounds: Vec<Vec<Vec<Reg>>>,
    pub z_consistency: Vec<Vec<Reg>>,
    pub x_consistency: Vec<Vec<Reg>>,
}

/// One time step: simultaneous quantum locations plus trailing classical work.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Moment {
    pub locations: Vec<Location>,
    pub assigns: Vec<RegAssign>,
    pub tracked: Vec<TrackedUpdate>,
    pub decode: Option<DecodeSpec>,
}

impl Moment {
    pub fn is_noisy(&self) -> bool {
        self.locations.iter().any(Location::is_fault_location)
    }
}

/// Role tag for every qubit in the registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitRole {
    Data { block: BlockId, row: u16, col: u16 },
    Ancilla { label: String },
}

/// A code block: grid shape and the row-major grid -> qubit map. The map is
/// the block's final state; decode specs snapshot intermediate shapes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockInfo {
    pub n1: u16,
    pub n2: u16,
    pub grid: Vec<Qubit>,
}

/// An enumerable fault site inside the noise window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultSite {
    pub moment: u32,
    pub loc: u32,
    pub q0: Qubit,
    /// Second qubit for two-qubit locations.
    pub q1: Option<Qubit>,
}

impl FaultSite {
    pub fn support(&self) -> usize {
        if self.q1.is_some() {
            2
        } else {
            1
        }
    }
}

/// A complete circuit with its derived fault-injection metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Circuit {
    pub moments: Vec<Moment>,
    pub n_qubits: u32,
    pub n_regs: u32,
    pub roles: Vec<QubitRole>,
    pub blocks: Vec<BlockInfo>,
    /// Moment range `[start, end)` eligible for fault injection.
    pub noise_window: (usize, usize),
    /// Flattened fault locations inside the noise window, in time order.
    pub fault_sites: Vec<FaultSite>,
    /// `slot_map[k] = (site index, qubit-within-site)` for noise sampling
    /// over the flat per-qubit slot space.
    pub slot_map: Vec<(u32, u8)>,
    /// Qubits whose last use is in the given moment (freed afterwards).
    pub retire: Vec<Vec<Qubit>>,
    /// Peak number of simultaneously live qubits.
    pub peak_live: usize,
}

impl Circuit {
    /// Number of fault-eligible locations (the `locations` CSV column).
    pub fn fault_location_count(&self) -> usize {
        self.fault_sites.len()
    }

    /// Total single-fault assignments: 3 per one-qubit site, 15 per CNOT.
    pub fn single_fault_count(&self) -> usize {
        self.fault_sites.iter().map(|s| if s.q1.is_some() { 15 } else { 3 }).sum()
    }

    /// Structural hash of the canonical form, for build-determinism checks.
    pub fn canonical_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.moments.hash(&mut h);
        self.roles.hash(&mut h);
        self.blocks.hash(&mut h);
        self.noise_window.hash(&mut h);
        h.finish()
    }

    fn qubit_name(&self, q: Qubit) -> String {
        match &self.roles[q as usize] {
            QubitRole::Data { block, row, col } => {
                if self.blocks.len() > 1 {
                    format!("b{block}({row},{col})")
                } else {
                    format!("({row},{col})")
                }
            }
            QubitRole::Ancilla { label } => format!("a{q}[{label}]"),
        }
    }

    fn expr_text(e: &ClassicalExpr) -> String {
        match e {
            ClassicalExpr::Const(b) => format!("const {}", *b as u8),
            ClassicalExpr::Parity(r) => {
                format!("parity[{}]", r.iter().map(|x| format!("r{x}")).collect::<Vec<_>>().join(","))
            }
            ClassicalExpr::Majority(r) => {
                format!("majority[{}]", r.iter().map(|x| format!("r{x}")).collect::<Vec<_>>().join(","))
            }
        }
    }

    /// Canonical, diff-stable text listing: one location per line.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (t, m) in self.moments.iter().enumerate() {
            for loc in &m.locations {
                let line = match loc {
                    Location::Cnot { control, target } => format!(
                        "t={t:<4} cnot   {} -> {}",
                        self.qubit_name(*control),
                        self.qubit_name(*target)
                    ),
                    Location::MeasZ { q, out } => {
                        format!("t={t:<4} measz  {} -> r{out}", self.qubit_name(*q))
                    }
                    Location::MeasX { q, out } => {
                        format!("t={t:<4} measx  {} -> r{out}", self.qubit_name(*q))
                    }
                    Location::ClassicalPauli { kind, q, guard } => format!(
                        "t={t:<4} cpauli {:?} {} if {}",
                        kind,
                        self.qubit_name(*q),
                        Self::expr_text(guard)
                    ),
                    other => {
                        let (q, _) = other.qubits();
                        format!("t={t:<4} {:<6} {}", other.kind_name(), self.qubit_name(q))
                    }
                };
                out.push_str(&line);
                out.push('\n');
            }
            for a in &m.assigns {
                out.push_str(&format!("t={t:<4} let    r{} = {}\n", a.dst, Self::expr_text(&a.expr)));
            }
            for tr in &m.tracked {
                out.push_str(&format!(
                    "t={t:<4} track  {:?}_L on b{} if {}\n",
                    tr.pauli,
                    tr.block,
                    Self::expr_text(&tr.guard)
                ));
            }
            if let Some(d) = &m.decode {
                out.push_str(&format!(
                    "t={t:<4} decode b{} ({}x{}) z_rounds={} x_rounds={}\n",
                    d.block,
                    d.n1,
                    d.n2,
                    d.z_rounds.len(),
                    d.x_rounds.len()
                ));
            }
        }
        out
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    /// Structural invariants: disjoint qubits per moment, single-assignment
    /// registers read only after their write. Used by tests and debug paths.
    pub fn validate(&self) -> Result<(), String> {
        let mut written = vec![false; self.n_regs as usize];
        for (t, m) in self.moments.iter().enumerate() {
            let mut used = std::collections::HashSet::new();
            for loc in &m.locations {
                let (a, b) = loc.qubits();
                if !used.insert(a) {
                    return Err(format!("moment {t}: qubit {a} used twice"));
                }
                if let Some(b) = b {
                    if !used.insert(b) {
                        return Err(format!("moment {t}: qubit {b} used twice"));
                    }
                    if a == b {
                        return Err(format!("moment {t}: cnot with equal qubits"));
                    }
                }
                if let Location::ClassicalPauli { guard, .. } = loc {
                    for &r in guard.regs() {
                        if !written[r as usize] {
                            return Err(format!("moment {t}: guard reads unwritten r{r}"));
                        }
                    }
                }
            }
            // Measurements of this moment become readable for assigns below.
            for loc in &m.locations {
                match loc {
                    Location::MeasZ { out, .. } | Location::MeasX { out, .. } => {
                        if written[*out as usize] {
                            return Err(format!("moment {t}: register r{out} written twice"));
                        }
                        written[*out as usize] = true;
                    }
                    _ => {}
                }
            }
            for a in &m.assigns {
                for &r in a.expr.regs() {
                    if !written[r as usize] {
                        return Err(format!("moment {t}: assign reads unwritten r{r}"));
                    }
                }
                if written[a.dst as usize] {
                    return Err(format!("moment {t}: register r{} written twice", a.dst));
                }
                written[a.dst as usize] = true;
                if let ClassicalExpr::Majority(rs) = &a.expr {
                    if rs.len() % 2 == 0 {
                        return Err(format!("moment {t}: even majority"));
                    }
                }
            }
            for tr in &m.tracked {
                for &r in tr.guard.regs() {
                    if !written[r as usize] {
                        return Err(format!("moment {t}: tracked guard reads unwritten r{r}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Logical probe state prepared by the encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Probe {
    Zero,
    One,
    Plus,
    Minus,
}

/// Readout basis of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutBasis {
    Z,
    X,
}

impl Probe {
    pub fn basis(self) -> ReadoutBasis {
        match self {
            Probe::Zero | Probe::One => ReadoutBasis::Z,
            Probe::Plus | Probe::Minus => ReadoutBasis::X,
        }
    }

    pub fn expected_bit(self) -> bool {
        matches!(self, Probe::One | Probe::Minus)
    }
}
