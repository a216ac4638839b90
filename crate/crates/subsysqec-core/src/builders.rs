//! Circuit builders: syndrome extraction, encoding, code conversion between
//! `C(3,3)` and `C(5,3)`, transversal logical gates, extended rectangles, and
//! the repeated-memory chain.
//!
//! The extraction and conversion circuits reproduce their reference layouts
//! at gate granularity, including the redundant closing parity check each
//! extraction carries (the pair `(1, n1)` ladder closure for X-gauge
//! measurements, `(1, n2)` for Z-gauge) and the exact coupling order:
//!
//! - X-gauge extraction for column `j`: one `|0>`-then-`H` ancilla per pair
//!   `(i, i+1)`, bottom pair first, each controlling CNOTs onto the lower
//!   then the upper data qubit, then `H` and a Z measurement.
//! - Z-gauge extraction for row `i`: one `|0>` ancilla per pair `(j, j+1)`,
//!   rightmost pair first, data-controlled CNOTs (right neighbour first).
//!
//! One repetition extracts all columns (or rows) in parallel — the per-column
//! circuits act on disjoint qubits — while repetitions are sequential with
//! fresh ancillas. Fault-tolerance redundancy comes from whole-circuit
//! repetition (default r = 3).

use std::collections::BTreeSet;

use crate::circuit::{
    BlockId, BlockInfo, Circuit, ClassicalExpr, DecodeSpec, Location, Moment, PauliKind, Probe,
    Qubit, QubitRole, Reg, RegAssign, TrackedUpdate,
};
use crate::code::SubsystemCode;
use crate::{Error, Result};

/// Transversal logical gates available on a code block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransversalGate {
    X,
    Z,
    H,
}

/// Which memory chain to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ChainVariant {
    /// Encode `C(3,3)`, then N cycles of (idle + EC) under `C(3,3)`.
    Plain33,
    /// Encode `C(3,3)`, convert up, N cycles of (idle + EC) under `C(5,3)`,
    /// convert back down.
    Combined,
}

impl std::fmt::Display for ChainVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChainVariant::Plain33 => write!(f, "plain-3x3"),
            ChainVariant::Combined => write!(f, "combined"),
        }
    }
}

/// Registers produced by one X-gauge (Z-syndrome) extraction repetition.
#[derive(Debug, Clone)]
pub struct ZExtractionRegs {
    pub cols: Vec<u16>,
    /// `pair_regs[c][i-1]` = outcome of the `X(i,j)X(i+1,j)` measurement.
    pub pair_regs: Vec<Vec<Reg>>,
    /// Closing redundant check `X(1,j)X(n1,j)` per column.
    pub redundant: Vec<Reg>,
}

/// Registers produced by one Z-gauge (X-syndrome) extraction repetition.
#[derive(Debug, Clone)]
pub struct XExtractionRegs {
    pub rows: Vec<u16>,
    /// `pair_regs[r][j-1]` = outcome of the `Z(i,j)Z(i,j+1)` measurement.
    pub pair_regs: Vec<Vec<Reg>>,
    pub redundant: Vec<Reg>,
}

/// Incremental circuit assembler with liveness-aware idle padding.
pub struct CircuitBuilder {
    moments: Vec<Moment>,
    roles: Vec<QubitRole>,
    blocks: Vec<BlockInfo>,
    live: BTreeSet<Qubit>,
    n_regs: u32,
    noise_start: Option<usize>,
    noise_end: Option<usize>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self {
            moments: Vec::new(),
            roles: Vec::new(),
            blocks: Vec::new(),
            live: BTreeSet::new(),
            n_regs: 0,
            noise_start: None,
            noise_end: None,
        }
    }

    /// Builder over an existing data block, for fragments that extend a
    /// circuit already executed (ideal readout). Fresh ancillas and registers
    /// start above the parent's counters.
    pub fn attached(block: &BlockInfo, first_qubit: u32, first_reg: u32) -> Self {
        let mut roles = vec![QubitRole::Ancilla { label: "ext".into() }; first_qubit as usize];
        for (k, &q) in block.grid.iter().enumerate() {
            let row = k as u16 / block.n2 + 1;
            let col = k as u16 % block.n2 + 1;
            roles[q as usize] = QubitRole::Data { block: 0, row, col };
        }
        let live = block.grid.iter().copied().collect();
        Self {
            moments: Vec::new(),
            roles,
            blocks: vec![block.clone()],
            live,
            n_regs: first_reg,
            noise_start: Some(0),
            noise_end: Some(0),
        }
    }

    fn alloc_qubit(&mut self, role: QubitRole) -> Qubit {
        let q = self.roles.len() as Qubit;
        self.roles.push(role);
        q
    }

    fn fresh_reg(&mut self) -> Reg {
        let r = self.n_regs;
        self.n_regs += 1;
        r
    }

    /// Allocates a loose (non-block) qubit for ad-hoc circuits.
    pub fn alloc_loose_qubit(&mut self) -> Qubit {
        self.alloc_qubit(QubitRole::Ancilla { label: "q".into() })
    }

    /// Allocates a fresh classical register.
    pub fn alloc_reg(&mut self) -> Reg {
        self.fresh_reg()
    }

    /// Allocates an `n1 x n2` block of data qubits, live from the start.
    pub fn add_block(&mut self, n1: u16, n2: u16) -> BlockId {
        let id = self.blocks.len() as BlockId;
        let mut grid = Vec::with_capacity(n1 as usize * n2 as usize);
        for row in 1..=n1 {
            for col in 1..=n2 {
                let q = self.alloc_qubit(QubitRole::Data { block: id, row, col });
                grid.push(q);
                self.live.insert(q);
            }
        }
        self.blocks.push(BlockInfo { n1, n2, grid });
        id
    }

    pub fn block(&self, b: BlockId) -> &BlockInfo {
        &self.blocks[b as usize]
    }

    fn block_qubit(&self, b: BlockId, row: u16, col: u16) -> Qubit {
        let info = &self.blocks[b as usize];
        info.grid[(row as usize - 1) * info.n2 as usize + (col as usize - 1)]
    }

    /// Marks the start of the fault-injection window.
    pub fn begin_noise(&mut self) {
        self.noise_start = Some(self.moments.len());
    }

    /// Marks the end of the fault-injection window.
    pub fn end_noise(&mut self) {
        self.noise_end = Some(self.moments.len());
    }

    /// Appends a quantum moment, padding every live qubit not acted on with
    /// an explicit idle location (so memory noise is costed).
    pub fn push_moment(&mut self, mut locations: Vec<Location>) {
        let mut acted: Vec<Qubit> = Vec::with_capacity(locations.len() * 2);
        for loc in &locations {
            let (a, b) = loc.qubits();
            acted.push(a);
            if let Some(b) = b {
                acted.push(b);
            }
            if matches!(loc, Location::Prep0 { .. } | Location::PrepPlus { .. }) {
                self.live.insert(a);
            }
        }
        if locations.iter().any(Location::is_fault_location) {
            for &q in &self.live {
                if !acted.contains(&q) {
                    locations.push(Location::Idle { q });
                }
            }
        }
        for loc in &locations {
            if loc.is_measurement() {
                self.live.remove(&loc.qubits().0);
            }
        }
        self.moments.push(Moment { locations, ..Default::default() });
    }

    /// Appends a zero-duration classical moment (no idle padding).
    pub fn push_classical(
        &mut self,
        locations: Vec<Location>,
        assigns: Vec<RegAssign>,
        tracked: Vec<TrackedUpdate>,
    ) {
        debug_assert!(locations.iter().all(|l| !l.is_fault_location()));
        self.moments.push(Moment { locations, assigns, tracked, decode: None });
    }

    fn push_decode(&mut self, spec: DecodeSpec) {
        self.moments.push(Moment { decode: Some(spec), ..Default::default() });
    }

    /// One X-gauge extraction repetition over the given columns in parallel.
    pub fn append_z_extraction(
        &mut self,
        b: BlockId,
        code: &SubsystemCode,
        cols: &[u16],
    ) -> ZExtractionRegs {
        let n1 = code.n1();
        // Ancilla time order: bottom pair (n1-1, n1) first, then up the
        // ladder, redundant (1, n1) closure last.
        let order: Vec<Option<u16>> =
            (1..n1).rev().map(Some).chain([None]).collect();
        let mut ancs: Vec<Vec<Qubit>> = Vec::new();
        let mut regs = ZExtractionRegs {
            cols: cols.to_vec(),
            pair_regs: vec![vec![0; n1 as usize - 1]; cols.len()],
            redundant: vec![0; cols.len()],
        };
        for _ in cols {
            ancs.push(
                order
                    .iter()
                    .map(|_| self.alloc_qubit(QubitRole::Ancilla { label: "sx".into() }))
                    .collect(),
            );
        }
        self.push_moment(
            ancs.iter().flatten().map(|&q| Location::Prep0 { q }).collect(),
        );
        self.push_moment(ancs.iter().flatten().map(|&q| Location::H { q }).collect());
        for (k, pair) in order.iter().enumerate() {
            // Lower target first, then upper; the closure couples row 1 first.
            let (first, second) = match pair {
                Some(i) => (i + 1, *i),
                None => (1, n1),
            };
            for row in [first, second] {
                self.push_moment(
                    cols.iter()
                        .enumerate()
                        .map(|(c, &j)| Location::Cnot {
                            control: ancs[c][k],
                            target: self.block_qubit(b, row, j),
                        })
                        .collect(),
                );
            }
        }
        self.push_moment(ancs.iter().flatten().map(|&q| Location::H { q }).collect());
        let mut meas = Vec::new();
        for (c, col_ancs) in ancs.iter().enumerate() {
            for (k, pair) in order.iter().enumerate() {
                let out = self.fresh_reg();
                match pair {
                    Some(i) => regs.pair_regs[c][*i as usize - 1] = out,
                    None => regs.redundant[c] = out,
                }
                meas.push(Location::MeasZ { q: col_ancs[k], out });
            }
        }
        self.push_moment(meas);
        regs
    }

    /// One Z-gauge extraction repetition over the given rows in parallel.
    pub fn append_x_extraction(
        &mut self,
        b: BlockId,
        code: &SubsystemCode,
        rows: &[u16],
    ) -> XExtractionRegs {
        let n2 = code.n2();
        let order: Vec<Option<u16>> =
            (1..n2).rev().map(Some).chain([None]).collect();
        let mut ancs: Vec<Vec<Qubit>> = Vec::new();
        let mut regs = XExtractionRegs {
            rows: rows.to_vec(),
            pair_regs: vec![vec![0; n2 as usize - 1]; rows.len()],
            redundant: vec![0; rows.len()],
        };
        for _ in rows {
            ancs.push(
                order
                    .iter()
                    .map(|_| self.alloc_qubit(QubitRole::Ancilla { label: "sz".into() }))
                    .collect(),
            );
        }
        self.push_moment(
            ancs.iter().flatten().map(|&q| Location::Prep0 { q }).collect(),
        );
        for (k, pair) in order.iter().enumerate() {
            let (first, second) = match pair {
                Some(j) => (j + 1, *j),
                None => (1, n2),
            };
            for col in [first, second] {
                self.push_moment(
                    rows.iter()
                        .enumerate()
                        .map(|(r, &i)| Location::Cnot {
                            control: self.block_qubit(b, i, col),
                            target: ancs[r][k],
                        })
                        .collect(),
                );
            }
        }
        let mut meas = Vec::new();
        for (r, row_ancs) in ancs.iter().enumerate() {
            for (k, pair) in order.iter().enumerate() {
                let out = self.fresh_reg();
                match pair {
                    Some(j) => regs.pair_regs[r][*j as usize - 1] = out,
                    None => regs.redundant[r] = out,
                }
                meas.push(Location::MeasZ { q: row_ancs[k], out });
            }
        }
        self.push_moment(meas);
        regs
    }

    /// A full error-correction round: `rz` X-gauge repetitions over all
    /// columns, `rx` Z-gauge repetitions over all rows, and a decode step
    /// that majority-votes the per-round corrections.
    pub fn append_ec_round(
        &mut self,
        b: BlockId,
        code: &SubsystemCode,
        rz: u32,
        rx: u32,
    ) -> Result<()> {
        if rz % 2 == 0 || rx % 2 == 0 {
            return Err(Error::EvenRepetition(rz, rx));
        }
        let cols: Vec<u16> = (1..=code.n2()).collect();
        let rows: Vec<u16> = (1..=code.n1()).collect();
        let mut spec = DecodeSpec {
            block: b,
            n1: code.n1(),
            n2: code.n2(),
            grid: self.blocks[b as usize].grid.clone(),
            z_rounds: Vec::new(),
            x_rounds: Vec::new(),
            z_consistency: Vec::new(),
            x_consistency: Vec::new(),
        };
        for _ in 0..rz {
            let r = self.append_z_extraction(b, code, &cols);
            let mut per_stab = Vec::new();
            for i in 0..code.n1() as usize - 1 {
                per_stab.push((0..cols.len()).map(|c| r.pair_regs[c][i]).collect());
            }
            for c in 0..cols.len() {
                let mut group = r.pair_regs[c].clone();
                group.push(r.redundant[c]);
                spec.z_consistency.push(group);
            }
            spec.z_rounds.push(per_stab);
        }
        for _ in 0..rx {
            let r = self.append_x_extraction(b, code, &rows);
            let mut per_stab = Vec::new();
            for j in 0..code.n2() as usize - 1 {
                per_stab.push((0..rows.len()).map(|x| r.pair_regs[x][j]).collect());
            }
            for x in 0..rows.len() {
                let mut group = r.pair_regs[x].clone();
                group.push(r.redundant[x]);
                spec.x_consistency.push(group);
            }
            spec.x_rounds.push(per_stab);
        }
        self.push_decode(spec);
        Ok(())
    }

    /// Encodes the block into the requested logical probe state.
    ///
    /// `|0_L>`: prepare every qubit in `|0>` (all Z sheets are then +1),
    /// measure the X-gauge operators once, and apply classically controlled
    /// Z corrections — one per X stabilizer, on the column-1 qubit of each
    /// row whose prefix syndrome parity is odd — forcing every `S_X` bit to
    /// +1. `|+_L>` is the dual construction. Encoders sit outside every
    /// measured extended rectangle.
    pub fn append_encode(&mut self, b: BlockId, code: &SubsystemCode, probe: Probe) {
        let data: Vec<Qubit> = self.blocks[b as usize].grid.clone();
        match probe.basis() {
            crate::circuit::ReadoutBasis::Z => {
                self.push_moment(data.iter().map(|&q| Location::Prep0 { q }).collect());
                let cols: Vec<u16> = (1..=code.n2()).collect();
                let r = self.append_z_extraction(b, code, &cols);
                // Z on (k,1) iff the syndrome bits of stabilizers 1..k-1 XOR
                // to one; multiplying these tails enacts exactly the flips
                // the measured pattern requires.
                let mut prefix: Vec<Reg> = Vec::new();
                let mut corrections = Vec::new();
                for k in 2..=code.n1() {
                    let i = (k - 2) as usize; // stabilizer S_X_{k-1}
                    for c in 0..cols.len() {
                        prefix.push(r.pair_regs[c][i]);
                    }
                    corrections.push(Location::ClassicalPauli {
                        kind: PauliKind::Z,
                        q: self.block_qubit(b, k, 1),
                        guard: ClassicalExpr::Parity(prefix.clone()),
                    });
                }
                self.push_classical(corrections, vec![], vec![]);
                if probe == Probe::One {
                    let flip = (1..=code.n2())
                        .map(|j| Location::X { q: self.block_qubit(b, 1, j) })
                        .collect();
                    self.push_moment(flip);
                }
            }
            crate::circuit::ReadoutBasis::X => {
                self.push_moment(data.iter().map(|&q| Location::PrepPlus { q }).collect());
                let rows: Vec<u16> = (1..=code.n1()).collect();
                let r = self.append_x_extraction(b, code, &rows);
                let mut prefix: Vec<Reg> = Vec::new();
                let mut corrections = Vec::new();
                for k in 2..=code.n2() {
                    let j = (k - 2) as usize; // stabilizer S_Z_{k-1}
                    for x in 0..rows.len() {
                        prefix.push(r.pair_regs[x][j]);
                    }
                    corrections.push(Location::ClassicalPauli {
                        kind: PauliKind::X,
                        q: self.block_qubit(b, 1, k),
                        guard: ClassicalExpr::Parity(prefix.clone()),
                    });
                }
                self.push_classical(corrections, vec![], vec![]);
                if probe == Probe::Minus {
                    let flip = (1..=code.n1())
                        .map(|i| Location::Z { q: self.block_qubit(b, i, 1) })
                        .collect();
                    self.push_moment(flip);
                }
            }
        }
    }

    /// One explicit memory step on all data qubits of the block.
    pub fn append_idle(&mut self, b: BlockId) {
        let locs = self.blocks[b as usize]
            .grid
            .iter()
            .map(|&q| Location::Idle { q })
            .collect();
        self.push_moment(locs);
    }

    /// Converts a `C(3,3)` block up to `C(5,3)`.
    ///
    /// Two fresh rows start in `|0...0>` (already Z-stabilized), then per
    /// column the parities `<X(2,j)X(4,j)>` and `<X(3,j)X(5,j)>` are measured
    /// with an ancilla pair; the per-operator parity across columns controls
    /// Z corrections on (4,1) and (5,1) so the output is a +1 eigenstate of
    /// the full `C(5,3)` stabilizer set. A Z error on row 2 or 3 of the
    /// input is thereby copied onto row 4 or 5, which the following `C(5,3)`
    /// correction absorbs.
    pub fn append_convert_up(&mut self, b: BlockId) {
        let info = self.blocks[b as usize].clone();
        assert_eq!((info.n1, info.n2), (3, 3), "convert_up expects a C(3,3) block");
        let n2 = info.n2;
        let mut grid = info.grid.clone();
        for row in 4..=5u16 {
            for col in 1..=n2 {
                let q = self.alloc_qubit(QubitRole::Data { block: b, row, col });
                grid.push(q);
            }
        }
        self.blocks[b as usize] = BlockInfo { n1: 5, n2, grid };

        let mut anc24 = Vec::new();
        let mut anc35 = Vec::new();
        for _ in 1..=n2 {
            anc24.push(self.alloc_qubit(QubitRole::Ancilla { label: "cu".into() }));
            anc35.push(self.alloc_qubit(QubitRole::Ancilla { label: "cu".into() }));
        }
        let mut preps: Vec<Location> = Vec::new();
        for row in 4..=5u16 {
            for col in 1..=n2 {
                preps.push(Location::Prep0 { q: self.block_qubit(b, row, col) });
            }
        }
        preps.extend(anc24.iter().chain(&anc35).map(|&q| Location::Prep0 { q }));
        self.push_moment(preps);
        self.push_moment(anc24.iter().chain(&anc35).map(|&q| Location::H { q }).collect());
        // X(3,j)X(5,j) pair couples first, lower row leading.
        for (anc, rows) in [(&anc35, [5u16, 3]), (&anc24, [4u16, 2])] {
            for row in rows {
                self.push_moment(
                    (1..=n2)
                        .map(|j| Location::Cnot {
                            control: anc[j as usize - 1],
                            target: self.block_qubit(b, row, j),
                        })
                        .collect(),
                );
            }
        }
        self.push_moment(anc24.iter().chain(&anc35).map(|&q| Location::H { q }).collect());
        let mut meas = Vec::new();
        let mut u_regs = Vec::new();
        let mut v_regs = Vec::new();
        for j in 0..n2 as usize {
            let u = self.fresh_reg();
            u_regs.push(u);
            meas.push(Location::MeasZ { q: anc24[j], out: u });
            let v = self.fresh_reg();
            v_regs.push(v);
            meas.push(Location::MeasZ { q: anc35[j], out: v });
        }
        self.push_moment(meas);
        self.push_classical(
            vec![
                Location::ClassicalPauli {
                    kind: PauliKind::Z,
                    q: self.block_qubit(b, 4, 1),
                    guard: ClassicalExpr::Parity(u_regs),
                },
                Location::ClassicalPauli {
                    kind: PauliKind::Z,
                    q: self.block_qubit(b, 5, 1),
                    guard: ClassicalExpr::Parity(v_regs),
                },
            ],
            vec![],
            vec![],
        );
    }

    /// Converts a `C(5,3)` block down to `C(3,3)`.
    ///
    /// Rows 5 then 4 are gauge-fixed to +1 eigenstates of their row-local Z
    /// pairs by a Z-gauge extraction; the classically controlled X
    /// corrections land on the measured row and on the matching column of
    /// row 1, so both codes' Z stabilizers end up satisfied. The six qubits
    /// of rows 4-5 are then measured in the computational basis; each row
    /// majority-votes to `|000>` or `|111>`, and the parity of the two row
    /// majorities is recorded as a tracked logical Pauli on the output block
    /// (the operator that flips the `Z_{*,1}` readout) instead of being
    /// corrected physically.
    ///
    /// Gauge fixing measures each row's pairs `passes` times (odd) with no
    /// corrections in between — the first pass projects the gauge values, so
    /// later passes re-read constants and the per-read bit majority is
    /// sound — then applies one correction per row from the voted reads.
    ///
    /// The corrections deliberately avoid column 1. Any X correction there
    /// anticommutes with the column-1 logical operator, and a single stale
    /// gauge read can then strand its row-1 copy as a physical frame whose
    /// later removal by error correction flips the logical readout with no
    /// classical record. Confined to columns 2 and 3 the table is
    /// `X(row,2)` iff `Z(row,1)Z(row,2)` read -1 and `X(row,3)` iff the two
    /// pair reads differ (both plain parities), every correction commutes
    /// with the logical operators, and single-fault damage reduces to
    /// weight-one frames on safe columns plus row-measurement flips that the
    /// per-row majority absorbs.
    pub fn append_convert_down(
        &mut self,
        b: BlockId,
        code53: &SubsystemCode,
        passes: u32,
    ) -> Result<()> {
        let info = self.blocks[b as usize].clone();
        assert_eq!((info.n1, info.n2), (5, 3), "convert_down expects a C(5,3) block");
        if passes % 2 == 0 {
            return Err(Error::EvenMajority(passes as usize));
        }
        let n2 = info.n2;

        // Gauge-fix rows 5 then 4 (the P gate sequence applied per row). The
        // classically controlled X corrections land on the measured row and,
        // copied, on the matching column of row 1, so both codes' Z
        // stabilizers end up satisfied.
        for row in [5u16, 4] {
            // Vote the two correction guards directly rather than the raw
            // pair reads: a fault landing between one pass's two reads
            // desynchronizes them by one pass, and voting r12 and r23
            // separately then splits the fault's syndrome across the output
            // stabilizers. The guard combinations r12 and r12^r23 shift
            // together, so their votes land on one consistent snapshot.
            let mut col2_votes = Vec::with_capacity(passes as usize);
            let mut col3_votes = Vec::with_capacity(passes as usize);
            for _ in 0..passes {
                let regs = self.append_x_extraction(b, code53, &[row]);
                let r12 = regs.pair_regs[0][0];
                let r23 = regs.pair_regs[0][1];
                let d = self.fresh_reg();
                self.push_classical(
                    vec![],
                    vec![RegAssign { dst: d, expr: ClassicalExpr::Parity(vec![r12, r23]) }],
                    vec![],
                );
                col2_votes.push(r12);
                col3_votes.push(d);
            }
            let g2 = self.fresh_reg();
            let g3 = self.fresh_reg();
            self.push_classical(
                vec![],
                vec![
                    RegAssign { dst: g2, expr: ClassicalExpr::Majority(col2_votes) },
                    RegAssign { dst: g3, expr: ClassicalExpr::Majority(col3_votes) },
                ],
                vec![],
            );
            let mut corrections = Vec::new();
            for (col, guard) in [(2u16, g2), (3u16, g3)] {
                corrections.push(Location::ClassicalPauli {
                    kind: PauliKind::X,
                    q: self.block_qubit(b, row, col),
                    guard: ClassicalExpr::Parity(vec![guard]),
                });
                corrections.push(Location::ClassicalPauli {
                    kind: PauliKind::X,
                    q: self.block_qubit(b, 1, col),
                    guard: ClassicalExpr::Parity(vec![guard]),
                });
            }
            self.push_classical(corrections, vec![], vec![]);
        }

        // Measure out rows 4 and 5.
        let mut meas = Vec::new();
        let mut m_regs: Vec<Vec<Reg>> = vec![Vec::new(), Vec::new()];
        for row in [4u16, 5] {
            for col in 1..=n2 {
                let out = self.fresh_reg();
                m_regs[row as usize - 4].push(out);
                meas.push(Location::MeasZ { q: self.block_qubit(b, row, col), out });
            }
        }
        self.push_moment(meas);
        let maj4 = self.fresh_reg();
        let maj5 = self.fresh_reg();
        self.push_classical(
            vec![],
            vec![
                RegAssign { dst: maj4, expr: ClassicalExpr::Majority(m_regs[0].clone()) },
                RegAssign { dst: maj5, expr: ClassicalExpr::Majority(m_regs[1].clone()) },
            ],
            vec![TrackedUpdate {
                block: b,
                pauli: PauliKind::X,
                guard: ClassicalExpr::Parity(vec![maj4, maj5]),
            }],
        );

        let grid = info.grid[..9].to_vec();
        self.blocks[b as usize] = BlockInfo { n1: 3, n2, grid };
        Ok(())
    }

    /// Transversal logical gate on one block.
    pub fn append_transversal(&mut self, b: BlockId, gate: TransversalGate) -> Result<()> {
        let info = self.blocks[b as usize].clone();
        match gate {
            TransversalGate::X => {
                let locs = (1..=info.n2)
                    .map(|j| Location::X { q: self.block_qubit(b, 1, j) })
                    .collect();
                self.push_moment(locs);
            }
            TransversalGate::Z => {
                let locs = (1..=info.n1)
                    .map(|i| Location::Z { q: self.block_qubit(b, i, 1) })
                    .collect();
                self.push_moment(locs);
            }
            TransversalGate::H => {
                if info.n1 != info.n2 {
                    return Err(Error::NonSquareHadamard(info.n1, info.n2));
                }
                let locs = info.grid.iter().map(|&q| Location::H { q }).collect();
                self.push_moment(locs);
                // Physical H exchanges the X and Z sheet structure; the grid
                // transposition relabel restores the code frame at zero cost.
                let n = info.n1 as usize;
                let mut grid = vec![0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        grid[c * n + r] = info.grid[r * n + c];
                    }
                }
                for (k, &q) in grid.iter().enumerate() {
                    self.roles[q as usize] = QubitRole::Data {
                        block: b,
                        row: k as u16 / info.n2 + 1,
                        col: k as u16 % info.n2 + 1,
                    };
                }
                self.blocks[b as usize] = BlockInfo { n1: info.n1, n2: info.n2, grid };
            }
        }
        Ok(())
    }

    /// Transversal CNOT between two same-shape blocks.
    pub fn append_transversal_cnot(&mut self, control: BlockId, target: BlockId) {
        let ci = self.blocks[control as usize].clone();
        let ti = self.blocks[target as usize].clone();
        assert_eq!((ci.n1, ci.n2), (ti.n1, ti.n2), "blocks must be same shape");
        let locs = ci
            .grid
            .iter()
            .zip(&ti.grid)
            .map(|(&c, &t)| Location::Cnot { control: c, target: t })
            .collect();
        self.push_moment(locs);
    }

    pub fn finish(self) -> Circuit {
        let n_qubits = self.roles.len() as u32;
        let noise_window = match (self.noise_start, self.noise_end) {
            (Some(s), Some(e)) => (s, e),
            (Some(s), None) => (s, self.moments.len()),
            (None, _) => (0, self.moments.len()),
        };

        let mut fault_sites = Vec::new();
        let mut slot_map = Vec::new();
        for (t, m) in self.moments.iter().enumerate().take(noise_window.1).skip(noise_window.0)
        {
            for (l, loc) in m.locations.iter().enumerate() {
                if !loc.is_fault_location() {
                    continue;
                }
                let (q0, q1) = loc.qubits();
                let site = fault_sites.len() as u32;
                fault_sites.push(crate::circuit::FaultSite {
                    moment: t as u32,
                    loc: l as u32,
                    q0,
                    q1,
                });
                slot_map.push((site, 0));
                if q1.is_some() {
                    slot_map.push((site, 1));
                }
            }
        }

        // Retirement: a qubit whose last appearance is a measurement frees
        // its simulator slot right after that moment.
        let mut last_use = vec![usize::MAX; n_qubits as usize];
        let mut last_is_meas = vec![false; n_qubits as usize];
        for (t, m) in self.moments.iter().enumerate() {
            for loc in &m.locations {
                let (a, b) = loc.qubits();
                last_use[a as usize] = t;
                last_is_meas[a as usize] = loc.is_measurement();
                if let Some(b) = b {
                    last_use[b as usize] = t;
                    last_is_meas[b as usize] = false;
                }
            }
        }
        let mut retire = vec![Vec::new(); self.moments.len()];
        for q in 0..n_qubits as usize {
            if last_use[q] != usize::MAX && last_is_meas[q] {
                retire[last_use[q]].push(q as u32);
            }
        }

        // Peak live count, replaying allocation order.
        let mut seen = vec![false; n_qubits as usize];
        let mut live = 0usize;
        let mut peak = 0usize;
        for (t, m) in self.moments.iter().enumerate() {
            for loc in &m.locations {
                let (a, b) = loc.qubits();
                for q in [Some(a), b].into_iter().flatten() {
                    if !seen[q as usize] {
                        seen[q as usize] = true;
                        live += 1;
                    }
                }
            }
            peak = peak.max(live);
            live -= retire[t].len();
        }

        let circuit = Circuit {
            moments: self.moments,
            n_qubits,
            n_regs: self.n_regs,
            roles: self.roles,
            blocks: self.blocks,
            noise_window,
            fault_sites,
            slot_map,
            retire,
            peak_live: peak,
        };
        debug_assert_eq!(circuit.validate(), Ok(()));
        circuit
    }
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Standalone X-gauge (Z-syndrome) extraction circuit for one column.
pub fn z_syndrome_extraction(code: &SubsystemCode, col: u16) -> Result<Circuit> {
    if col < 1 || col > code.n2() {
        return Err(Error::ColumnOutOfRange(col, code.n2()));
    }
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(code.n1(), code.n2());
    b.append_z_extraction(blk, code, &[col]);
    Ok(b.finish())
}

/// Standalone Z-gauge (X-syndrome) extraction circuit for one row.
pub fn x_syndrome_extraction(code: &SubsystemCode, row: u16) -> Result<Circuit> {
    if row < 1 || row > code.n1() {
        return Err(Error::RowOutOfRange(row, code.n1()));
    }
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(code.n1(), code.n2());
    b.append_x_extraction(blk, code, &[row]);
    Ok(b.finish())
}

/// Standalone full EC round.
pub fn ec_round(code: &SubsystemCode, rz: u32, rx: u32) -> Result<Circuit> {
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(code.n1(), code.n2());
    b.append_ec_round(blk, code, rz, rx)?;
    Ok(b.finish())
}

/// Standalone encoder for the given probe state.
pub fn encode_logical(code: &SubsystemCode, probe: Probe) -> Result<Circuit> {
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(code.n1(), code.n2());
    b.append_encode(blk, code, probe);
    Ok(b.finish())
}

/// Standalone conversion `C(3,3) -> C(5,3)` acting on an input block.
pub fn convert_up() -> Result<Circuit> {
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(3, 3);
    b.append_convert_up(blk);
    Ok(b.finish())
}

/// Standalone conversion `C(5,3) -> C(3,3)` acting on an input block, with
/// the given number of gauge-fixing passes per row.
pub fn convert_down(passes: u32) -> Result<Circuit> {
    let code53 = SubsystemCode::new(5, 3)?;
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(5, 3);
    b.append_convert_down(blk, &code53, passes)?;
    Ok(b.finish())
}

/// Memory extended rectangle: noiseless encode, then leading EC + one idle
/// step + trailing EC inside the fault window.
pub fn memory_exrec(code: &SubsystemCode, rz: u32, rx: u32, probe: Probe) -> Result<Circuit> {
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(code.n1(), code.n2());
    b.append_encode(blk, code, probe);
    b.begin_noise();
    b.append_ec_round(blk, code, rz, rx)?;
    b.append_idle(blk);
    b.append_ec_round(blk, code, rz, rx)?;
    b.end_noise();
    Ok(b.finish())
}

/// Conversion-up extended rectangle: leading EC under `C(3,3)`, the
/// conversion, trailing EC under `C(5,3)`.
pub fn convert_up_exrec(rz: u32, rx: u32, probe: Probe) -> Result<Circuit> {
    let c33 = SubsystemCode::new(3, 3)?;
    let c53 = SubsystemCode::new(5, 3)?;
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(3, 3);
    b.append_encode(blk, &c33, probe);
    b.begin_noise();
    b.append_ec_round(blk, &c33, rz, rx)?;
    b.append_convert_up(blk);
    b.append_ec_round(blk, &c53, rz, rx)?;
    b.end_noise();
    Ok(b.finish())
}

/// Conversion-down extended rectangle: leading EC under `C(5,3)`, the
/// conversion, trailing EC under `C(3,3)`.
pub fn convert_down_exrec(rz: u32, rx: u32, probe: Probe) -> Result<Circuit> {
    let c33 = SubsystemCode::new(3, 3)?;
    let c53 = SubsystemCode::new(5, 3)?;
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(5, 3);
    b.append_encode(blk, &c53, probe);
    b.begin_noise();
    b.append_ec_round(blk, &c53, rz, rx)?;
    b.append_convert_down(blk, &c53, 3)?;
    b.append_ec_round(blk, &c33, rz, rx)?;
    b.end_noise();
    Ok(b.finish())
}

/// Noiseless encode -> convert up -> convert down round trip.
pub fn roundtrip_circuit(probe: Probe) -> Result<Circuit> {
    let c33 = SubsystemCode::new(3, 3)?;
    let c53 = SubsystemCode::new(5, 3)?;
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(3, 3);
    b.append_encode(blk, &c33, probe);
    b.append_convert_up(blk);
    b.append_convert_down(blk, &c53, 1)?;
    b.begin_noise();
    b.end_noise();
    Ok(b.finish())
}

/// The repeated-memory chain of N error-correction cycles.
pub fn chain_circuit(
    variant: ChainVariant,
    n_cycles: u32,
    rz: u32,
    rx: u32,
    probe: Probe,
) -> Result<Circuit> {
    let c33 = SubsystemCode::new(3, 3)?;
    let mut b = CircuitBuilder::new();
    let blk = b.add_block(3, 3);
    b.append_encode(blk, &c33, probe);
    b.begin_noise();
    match variant {
        ChainVariant::Plain33 => {
            for _ in 0..n_cycles {
                b.append_idle(blk);
                b.append_ec_round(blk, &c33, rz, rx)?;
            }
        }
        ChainVariant::Combined => {
            let c53 = SubsystemCode::new(5, 3)?;
            b.append_convert_up(blk);
            for _ in 0..n_cycles {
                b.append_idle(blk);
                b.append_ec_round(blk, &c53, rz, rx)?;
            }
            b.append_convert_down(blk, &c53, 3)?;
        }
    }
    b.end_noise();
    Ok(b.finish())
}

/// Noiseless readout fragment: one EC pass (r = 1) plus decode on an
/// existing block, used by the ideal readout inside the simulator.
pub fn readout_fragment(
    code: &SubsystemCode,
    block: &BlockInfo,
    first_qubit: u32,
    first_reg: u32,
) -> Circuit {
    let mut b = CircuitBuilder::attached(block, first_qubit, first_reg);
    b.append_ec_round(0, code, 1, 1).expect("r=1 is odd");
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Location;

    fn count_kind(c: &Circuit, name: &str) -> usize {
        c.moments
            .iter()
            .flat_map(|m| &m.locations)
            .filter(|l| l.kind_name() == name)
            .count()
    }

    #[test]
    fn z_extraction_counts_match_reference_layout() {
        let code = SubsystemCode::new(5, 3).unwrap();
        let c = z_syndrome_extraction(&code, 1).unwrap();
        assert_eq!(count_kind(&c, "prep0"), 5);
        assert_eq!(count_kind(&c, "cnot"), 10);
        assert_eq!(count_kind(&c, "h"), 10);
        assert_eq!(count_kind(&c, "measz"), 5);
        assert!(z_syndrome_extraction(&code, 4).is_err());
    }

    #[test]
    fn x_extraction_counts_match_reference_layout() {
        let code = SubsystemCode::new(5, 3).unwrap();
        let c = x_syndrome_extraction(&code, 1).unwrap();
        assert_eq!(count_kind(&c, "prep0"), 3);
        assert_eq!(count_kind(&c, "cnot"), 6);
        assert_eq!(count_kind(&c, "h"), 0);
        assert_eq!(count_kind(&c, "measz"), 3);
        assert!(x_syndrome_extraction(&code, 6).is_err());
    }

    #[test]
    fn conversion_up_counts_per_column() {
        let c = convert_up().unwrap();
        // Per column: 2 ancillas, 4 CNOTs, 4 H, 2 measurements; 3 columns.
        assert_eq!(count_kind(&c, "cnot"), 12);
        assert_eq!(count_kind(&c, "h"), 12);
        assert_eq!(count_kind(&c, "measz"), 6);
        // 6 new data preps + 6 ancilla preps.
        assert_eq!(count_kind(&c, "prep0"), 12);
        assert_eq!(count_kind(&c, "cpauli"), 2);
    }

    #[test]
    fn ec_round_requires_odd_repetitions() {
        let code = SubsystemCode::new(3, 3).unwrap();
        assert!(matches!(ec_round(&code, 2, 3), Err(Error::EvenRepetition(2, 3))));
        assert!(ec_round(&code, 1, 1).is_ok());
    }

    #[test]
    fn ec_round_extraction_counts() {
        let code = SubsystemCode::new(5, 3).unwrap();
        let c = ec_round(&code, 3, 3).unwrap();
        // 3 repetitions x 3 columns x 5 ancillas + 3 x 5 rows x 3 ancillas.
        assert_eq!(count_kind(&c, "measz"), 3 * 3 * 5 + 3 * 5 * 3);
    }

    #[test]
    fn builders_are_deterministic() {
        let a = convert_up_exrec(3, 3, Probe::Zero).unwrap();
        let b = convert_up_exrec(3, 3, Probe::Zero).unwrap();
        assert_eq!(a.canonical_hash(), b.canonical_hash());
        assert_eq!(a.dump_text(), b.dump_text());
        let c = convert_up_exrec(3, 3, Probe::Plus).unwrap();
        assert_ne!(a.canonical_hash(), c.canonical_hash());
    }

    #[test]
    fn moments_use_disjoint_qubits_and_pad_idles() {
        let code = SubsystemCode::new(5, 3).unwrap();
        for circ in [
            memory_exrec(&code, 3, 3, Probe::Zero).unwrap(),
            convert_up_exrec(3, 3, Probe::Plus).unwrap(),
            convert_down_exrec(3, 3, Probe::Zero).unwrap(),
        ] {
            circ.validate().unwrap();
            // Every noisy moment touches every live data qubit.
            let data: Vec<Qubit> = circ
                .roles
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(r, QubitRole::Data { .. }))
                .map(|(q, _)| q as Qubit)
                .collect();
            for m in circ.moments.iter().filter(|m| m.is_noisy()) {
                let acted: std::collections::HashSet<Qubit> = m
                    .locations
                    .iter()
                    .flat_map(|l| {
                        let (a, b) = l.qubits();
                        [Some(a), b].into_iter().flatten()
                    })
                    .collect();
                // Data qubits not yet allocated or already measured out are
                // exempt; all currently-live ones must appear.
                let mut missing = 0;
                for &q in &data {
                    if !acted.contains(&q) {
                        missing += 1;
                    }
                }
                // The only data qubits allowed to be missing are rows 4-5 of
                // a conversion block before/after their lifetime; bounded by
                // one block extension (6 qubits).
                assert!(missing <= 6, "noisy moment missing {missing} live data qubits");
            }
        }
    }

    #[test]
    fn chain_location_count_grows_affinely() {
        let c0 = chain_circuit(ChainVariant::Plain33, 1, 3, 3, Probe::Zero).unwrap();
        let c1 = chain_circuit(ChainVariant::Plain33, 2, 3, 3, Probe::Zero).unwrap();
        let c2 = chain_circuit(ChainVariant::Plain33, 3, 3, 3, Probe::Zero).unwrap();
        let d1 = c1.fault_location_count() - c0.fault_location_count();
        let d2 = c2.fault_location_count() - c1.fault_location_count();
        assert_eq!(d1, d2, "location count must grow affinely in N");
        let k0 = chain_circuit(ChainVariant::Combined, 1, 3, 3, Probe::Zero).unwrap();
        let k1 = chain_circuit(ChainVariant::Combined, 2, 3, 3, Probe::Zero).unwrap();
        let k2 = chain_circuit(ChainVariant::Combined, 3, 3, 3, Probe::Zero).unwrap();
        assert_eq!(
            k1.fault_location_count() - k0.fault_location_count(),
            k2.fault_location_count() - k1.fault_location_count()
        );
    }

    #[test]
    fn plain_chain_n0_is_encode_only() {
        let c = chain_circuit(ChainVariant::Plain33, 0, 3, 3, Probe::Zero).unwrap();
        assert_eq!(c.fault_location_count(), 0, "noise window must be empty at N=0");
    }

    #[test]
    fn transversal_h_requires_square() {
        let code = SubsystemCode::new(5, 3).unwrap();
        let mut b = CircuitBuilder::new();
        let blk = b.add_block(code.n1(), code.n2());
        assert_eq!(
            b.append_transversal(blk, TransversalGate::H).unwrap_err(),
            Error::NonSquareHadamard(5, 3)
        );
        let mut b = CircuitBuilder::new();
        let blk = b.add_block(3, 3);
        b.append_transversal(blk, TransversalGate::H).unwrap();
    }

    #[test]
    fn dump_text_is_stable_and_lists_locations() {
        let code = SubsystemCode::new(5, 3).unwrap();
        let c = z_syndrome_extraction(&code, 1).unwrap();
        let text = c.dump_text();
        assert!(text.contains("cnot"));
        assert!(text.contains("measz"));
        assert_eq!(text, z_syndrome_extraction(&code, 1).unwrap().dump_text());
    }

    #[test]
    fn peak_live_fits_simulator_capacity() {
        for circ in [
            memory_exrec(&SubsystemCode::new(5, 3).unwrap(), 3, 3, Probe::Zero).unwrap(),
            chain_circuit(ChainVariant::Combined, 5, 3, 3, Probe::Plus).unwrap(),
        ] {
            assert!(circ.peak_live <= 64, "peak live {} exceeds capacity", circ.peak_live);
        }
    }
}
