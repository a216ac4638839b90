//! Signed Pauli-group arithmetic over GF(2) bit-vector pairs, plus the span
//! and minimum-weight coset queries that every "stabilized by" statement and
//! the brute-force distance oracle reduce to.
//!
//! An n-qubit Pauli is stored as an (x-part, z-part) pair of bit-vectors and
//! a sign, with the fixed ordering convention
//!
//! ```text
//!     P = (-1)^sign * (X^{x_1} ... X^{x_n}) * (Z^{z_1} ... Z^{z_n})
//! ```
//!
//! Under this convention products never leave {+1, -1}: commuting a Z past an
//! X contributes exactly one (-1), so the group closes over GF(2) x {+-1} and
//! no i-phase bookkeeping can arise. The price is that a site with both bits
//! set represents XZ = -iY; such a site squares to -identity, which is what
//! the sign-convention property test pins down.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-based position on the `n1 x n2` qubit grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridIndex {
    pub row: u16,
    pub col: u16,
}

impl GridIndex {
    pub fn new(row: u16, col: u16) -> Self {
        Self { row, col }
    }

    /// Row-major linearization for a grid with `n2` columns.
    pub fn linear(&self, n2: u16) -> usize {
        debug_assert!(self.row >= 1 && self.col >= 1 && self.col <= n2);
        (self.row as usize - 1) * n2 as usize + (self.col as usize - 1)
    }
}

impl std::fmt::Display for GridIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Single-site Pauli kind used when assembling operators site by site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SitePauli {
    X,
    Y,
    Z,
}

const WORD_BITS: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

/// A signed n-qubit Pauli operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    neg: bool,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self { n, x: vec![0; w], z: vec![0; w], neg: false }
    }

    /// Builds an operator from (site, kind) pairs; repeated sites compose.
    pub fn from_sites<I>(n: usize, sites: I) -> Self
    where
        I: IntoIterator<Item = (usize, SitePauli)>,
    {
        let mut p = Self::identity(n);
        for (q, kind) in sites {
            assert!(q < n, "site {q} out of range for {n} qubits");
            match kind {
                SitePauli::X => p.flip_x(q),
                SitePauli::Z => p.flip_z(q),
                SitePauli::Y => {
                    p.flip_x(q);
                    p.flip_z(q);
                }
            }
        }
        p
    }

    pub fn single(n: usize, q: usize, kind: SitePauli) -> Self {
        Self::from_sites(n, [(q, kind)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sign(&self) -> i8 {
        if self.neg {
            -1
        } else {
            1
        }
    }

    pub fn negate(&mut self) {
        self.neg = !self.neg;
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x[q / WORD_BITS] >> (q % WORD_BITS) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z[q / WORD_BITS] >> (q % WORD_BITS) & 1 == 1
    }

    fn flip_x(&mut self, q: usize) {
        self.x[q / WORD_BITS] ^= 1 << (q % WORD_BITS);
    }

    fn flip_z(&mut self, q: usize) {
        self.z[q / WORD_BITS] ^= 1 << (q % WORD_BITS);
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Number of sites where the operator acts non-trivially.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&xw, &zw)| (xw | zw).count_ones() as usize)
            .sum()
    }

    pub fn has_x_part(&self) -> bool {
        self.x.iter().any(|&w| w != 0)
    }

    pub fn has_z_part(&self) -> bool {
        self.z.iter().any(|&w| w != 0)
    }

    /// First non-identity column in the symplectic layout (x columns before
    /// z columns), used for Gaussian elimination pivoting.
    fn leading_col(&self) -> Option<usize> {
        for (i, &w) in self.x.iter().enumerate() {
            if w != 0 {
                return Some(i * WORD_BITS + w.trailing_zeros() as usize);
            }
        }
        for (i, &w) in self.z.iter().enumerate() {
            if w != 0 {
                return Some(self.n + i * WORD_BITS + w.trailing_zeros() as usize);
            }
        }
        None
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Symplectic commutation test: true iff the operators commute.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_len(other)?;
        let mut acc = 0u32;
        for i in 0..self.x.len() {
            acc ^= (self.x[i] & other.z[i]).count_ones();
            acc ^= (self.z[i] & other.x[i]).count_ones();
        }
        Ok(acc & 1 == 0)
    }

    /// In-place product `self <- self * other`, tracking the +-1 sign.
    ///
    /// Reordering self's Z-part past other's X-part contributes
    /// `(-1)^{|z_a & x_b|}`; no other phase appears under the X-before-Z
    /// storage convention.
    pub fn mul_assign(&mut self, other: &Self) -> Result<()> {
        self.check_len(other)?;
        let mut acc = 0u32;
        for i in 0..self.x.len() {
            acc ^= (self.z[i] & other.x[i]).count_ones();
            self.x[i] ^= other.x[i];
            self.z[i] ^= other.z[i];
        }
        self.neg ^= other.neg ^ (acc & 1 == 1);
        Ok(())
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.mul_assign(other)?;
        Ok(out)
    }

    /// Iterator over non-identity sites with their kinds.
    pub fn sites(&self) -> impl Iterator<Item = (usize, SitePauli)> + '_ {
        (0..self.n).filter_map(move |q| {
            match (self.x_bit(q), self.z_bit(q)) {
                (true, false) => Some((q, SitePauli::X)),
                (false, true) => Some((q, SitePauli::Z)),
                (true, true) => Some((q, SitePauli::Y)),
                (false, false) => None,
            }
        })
    }
}

/// An ordered list of Pauli generators over a common qubit count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSet {
    n: usize,
    gens: Vec<PauliOperator>,
}

impl GeneratorSet {
    pub fn new(n: usize) -> Self {
        Self { n, gens: Vec::new() }
    }

    pub fn from_generators(n: usize, gens: Vec<PauliOperator>) -> Self {
        assert!(gens.iter().all(|g| g.n() == n), "generator length mismatch");
        Self { n, gens }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn push(&mut self, g: PauliOperator) {
        assert_eq!(g.n(), self.n, "generator length mismatch");
        self.gens.push(g);
    }

    pub fn get(&self, i: usize) -> &PauliOperator {
        &self.gens[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PauliOperator> {
        self.gens.iter()
    }

    /// Verifies pairwise commutation of all generators.
    pub fn is_abelian(&self) -> bool {
        for (i, a) in self.gens.iter().enumerate() {
            for b in &self.gens[i + 1..] {
                if !a.commutes(b).expect("same n by construction") {
                    return false;
                }
            }
        }
        true
    }

    /// Restricts to generators whose non-identity sites are all of one kind.
    pub fn filter_pure(&self, restrict: CosetRestriction) -> GeneratorSet {
        let gens = self
            .gens
            .iter()
            .filter(|g| match restrict {
                CosetRestriction::ZOnly => !g.has_x_part(),
                CosetRestriction::XOnly => !g.has_z_part(),
                CosetRestriction::Any => true,
            })
            .cloned()
            .collect();
        GeneratorSet { n: self.n, gens }
    }

    pub fn concat(&self, other: &GeneratorSet) -> GeneratorSet {
        assert_eq!(self.n, other.n);
        let mut gens = self.gens.clone();
        gens.extend(other.gens.iter().cloned());
        GeneratorSet { n: self.n, gens }
    }
}

/// Echelonized GF(2) basis of a generator set, for repeated span queries.
///
/// Pivot rows are full signed operators so that sign-sensitive membership can
/// reduce an operator and inspect the leftover sign.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    n: usize,
    pivots: Vec<(usize, PauliOperator)>,
}

impl SpanBasis {
    pub fn build(set: &GeneratorSet) -> Self {
        let mut basis = Self { n: set.n(), pivots: Vec::new() };
        for g in set.iter() {
            basis.insert(g.clone());
        }
        basis
    }

    /// Rank of the spanned subgroup (mod signs).
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn insert(&mut self, mut g: PauliOperator) {
        g = self.reduce(&g);
        if let Some(col) = g.leading_col() {
            let pos = self.pivots.partition_point(|(c, _)| *c < col);
            self.pivots.insert(pos, (col, g));
        }
    }

    /// Reduces `p` by the basis; the result is identity iff `p` is in the
    /// span (up to sign — the residue's sign is meaningful).
    pub fn reduce(&self, p: &PauliOperator) -> PauliOperator {
        let mut r = p.clone();
        loop {
            let Some(col) = r.leading_col() else { return r };
            match self.pivots.binary_search_by_key(&col, |(c, _)| *c) {
                Ok(i) => {
                    r.mul_assign(&self.pivots[i].1).expect("same n");
                }
                Err(_) => return r,
            }
        }
    }

    /// Membership test; with `ignore_sign` the +-1 prefactor is disregarded.
    ///
    /// Sign-sensitive queries are meaningful when the generated group does
    /// not contain -identity (pure-type CSS generator sets). Sets with
    /// anticommuting or Y-bearing generators reach both signs of every
    /// element, so callers pass `ignore_sign = true` for those.
    pub fn contains(&self, p: &PauliOperator, ignore_sign: bool) -> bool {
        if p.n() != self.n {
            return false;
        }
        let r = self.reduce(p);
        r.is_identity() && (ignore_sign || !r.neg)
    }
}

/// True iff `p` is a product of the set's generators (optionally up to sign).
pub fn in_span(set: &GeneratorSet, p: &PauliOperator, ignore_sign: bool) -> Result<bool> {
    if set.n() != p.n() {
        return Err(Error::DimensionMismatch(set.n(), p.n()));
    }
    Ok(SpanBasis::build(set).contains(p, ignore_sign))
}

/// Which products to enumerate in [`min_weight_coset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CosetRestriction {
    ZOnly,
    XOnly,
    Any,
}

/// Hard cap on exhaustive coset enumeration (2^20 products).
pub const MAX_COSET_GENERATORS: usize = 20;

/// Minimum weight over `representative * span(set)` by exhaustive Gray-code
/// enumeration of all 2^k generator products.
///
/// This is deliberately brute force: it is the ground-truth distance oracle
/// the acceptance checks lean on, so no heuristic shortcuts.
pub fn min_weight_coset(
    set: &GeneratorSet,
    representative: &PauliOperator,
    restrict: CosetRestriction,
) -> Result<usize> {
    if set.n() != representative.n() {
        return Err(Error::DimensionMismatch(set.n(), representative.n()));
    }
    let filtered = set.filter_pure(restrict);
    if filtered.len() > MAX_COSET_GENERATORS {
        return Err(Error::EnumerationTooLarge(filtered.len(), MAX_COSET_GENERATORS));
    }
    let k = filtered.len();
    let mut current = representative.clone();
    let mut best = current.weight();
    // Gray-code walk: step i flips generator trailing_zeros(i).
    for i in 1u64..(1u64 << k) {
        let g = i.trailing_zeros() as usize;
        current.mul_assign(filtered.get(g)).expect("same n");
        best = best.min(current.weight());
    }
    Ok(best)
}

impl std::fmt::Display for PauliOperator {
    /// Compact site listing such as `+ X3 Z5 Y7`; identity prints `+ I`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", if self.neg { "-" } else { "+" })?;
        let mut any = false;
        for (q, kind) in self.sites() {
            any = true;
            let c = match kind {
                SitePauli::X => 'X',
                SitePauli::Y => 'Y',
                SitePauli::Z => 'Z',
            };
            write!(f, " {c}{q}")?;
        }
        if !any {
            write!(f, " I")?;
        }
        Ok(())
    }
}
