//! Turning repeated gauge-measurement outcomes into stabilizer syndromes and
//! minimal corrections.
//!
//! The stabilizer bits are parities of gauge outcomes (each stabilizer is a
//! product of pairwise gauge operators, so its eigenvalue is the XOR of the
//! measured pair eigenvalues). A syndrome bit vector is then a set of domain
//! walls between adjacent rows (for Z errors) or columns (for X errors): of
//! the two line sets consistent with the walls, the decoder picks the
//! smaller — odd grid dimensions rule out ties — and places one correction
//! per line on the fixed representative (column 1 for Z, row 1 for X).
//!
//! Across repetition rounds the error-correction path decodes each round and
//! takes the bitwise majority of the per-round corrections. Voting on
//! decoded corrections rather than on raw syndrome bits matters: a fault in
//! the middle of a round yields a half-updated syndrome whose bitwise-vote
//! with clean rounds can decode to a correction two lines away from the
//! truth, which a later exact round then completes into a logical operator.
//! Corrections from a polluted round are instead simply outvoted. The raw
//! bitwise syndrome vote is still provided as [`majority_bits`].

use serde::{Deserialize, Serialize};

use crate::circuit::Reg;
use crate::code::SubsystemCode;
use crate::pauli::{PauliOperator, SitePauli};
use crate::{Error, Result};

/// Reconstructed stabilizer bits for one error type and round, with the
/// redundant-check consistency bits retained for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeRecord {
    pub bits: Vec<bool>,
    pub consistency: Vec<bool>,
}

/// XOR-reconstructs stabilizer bits from gauge outcome registers.
///
/// `groups[i]` lists the registers whose parity is stabilizer bit `i`;
/// `consistency_groups` are register sets whose parity vanishes when the
/// redundant check agrees with the generating set.
pub fn reconstruct(
    groups: &[Vec<Reg>],
    consistency_groups: &[Vec<Reg>],
    read: impl Fn(Reg) -> Result<bool>,
) -> Result<SyndromeRecord> {
    let parity = |regs: &Vec<Reg>| -> Result<bool> {
        let mut acc = false;
        for &r in regs {
            acc ^= read(r)?;
        }
        Ok(acc)
    };
    let bits = groups.iter().map(&parity).collect::<Result<Vec<_>>>()?;
    let consistency = consistency_groups.iter().map(&parity).collect::<Result<Vec<_>>>()?;
    Ok(SyndromeRecord { bits, consistency })
}

/// Bitwise majority across an odd number of rounds.
pub fn majority_bits(rounds: &[Vec<bool>]) -> Result<Vec<bool>> {
    if rounds.len() % 2 == 0 {
        return Err(Error::EvenMajority(rounds.len()));
    }
    let width = rounds[0].len();
    debug_assert!(rounds.iter().all(|r| r.len() == width));
    let need = rounds.len() / 2 + 1;
    Ok((0..width)
        .map(|i| rounds.iter().filter(|r| r[i]).count() >= need)
        .collect())
}

/// Decodes a wall-indicator syndrome over `n_lines` adjacent lines into the
/// smaller of the two consistent line sets. Total: any bit pattern decodes.
pub fn decode(n_lines: usize, walls: &[bool]) -> Vec<bool> {
    debug_assert_eq!(walls.len(), n_lines - 1);
    let mut lines = vec![false; n_lines];
    let mut inside = false;
    for k in 0..n_lines {
        if k > 0 {
            inside ^= walls[k - 1];
        }
        lines[k] = inside;
    }
    let w = lines.iter().filter(|&&b| b).count();
    if 2 * w > n_lines {
        for b in &mut lines {
            *b = !*b;
        }
    }
    lines
}

/// Per-round decode followed by bitwise majority of the corrections.
pub fn decode_rounds(n_lines: usize, rounds: &[Vec<bool>]) -> Result<Vec<bool>> {
    let decoded: Vec<Vec<bool>> = rounds.iter().map(|w| decode(n_lines, w)).collect();
    majority_bits(&decoded)
}

/// Materializes a line set as the correction Pauli on the fixed
/// representatives: Z on column 1 of each marked row, X on row 1 of each
/// marked column.
pub fn correction_op(code: &SubsystemCode, kind: SitePauli, lines: &[bool]) -> PauliOperator {
    match kind {
        SitePauli::Z => PauliOperator::from_sites(
            code.n(),
            lines
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(k, _)| (code.site(k as u16 + 1, 1), SitePauli::Z)),
        ),
        SitePauli::X => PauliOperator::from_sites(
            code.n(),
            lines
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(k, _)| (code.site(1, k as u16 + 1), SitePauli::X)),
        ),
        SitePauli::Y => unreachable!("corrections are X- or Z-type"),
    }
}
