//! Indices into ℕ^m, constant-coefficient blocks, and finite supports.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// A point of ℕ^m. Coordinates are 1-based naturals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index(Vec<u64>);

impl Index {
    pub fn new(coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidIndex("index must have at least one coordinate".into()));
        }
        if let Some(pos) = coords.iter().position(|&c| c == 0) {
            return Err(Error::InvalidIndex(format!(
                "coordinate {} of {:?} is 0; coordinates start at 1",
                pos + 1,
                coords
            )));
        }
        Ok(Index(coords))
    }

    /// Builds an index without validation; callers guarantee coordinates ≥ 1.
    pub(crate) fn from_raw(coords: Vec<u64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|&c| c >= 1));
        Index(coords)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, pos: usize) -> u64 {
        self.0[pos]
    }

    pub(crate) fn with_coord(&self, pos: usize, value: u64) -> Index {
        let mut c = self.0.clone();
        c[pos] = value;
        Index(c)
    }

    /// Concatenation, used for tensor products.
    pub fn concat(&self, other: &Index) -> Index {
        let mut c = self.0.clone();
        c.extend_from_slice(&other.0);
        Index(c)
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Identical coefficients at `template` with coordinate `running` (0-based)
/// sweeping `lo..=hi`. The template's own value at `running` is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBlock {
    pub template: Index,
    pub running: usize,
    pub lo: u64,
    pub hi: u64,
    pub coefficient: f64,
}

impl ConstantBlock {
    pub fn new(template: Index, running: usize, lo: u64, hi: u64, coefficient: f64) -> Result<Self> {
        if running >= template.arity() {
            return Err(Error::InvalidIndex(format!(
                "running coordinate {} outside arity {}",
                running + 1,
                template.arity()
            )));
        }
        if lo == 0 || hi < lo {
            return Err(Error::InvalidIndex(format!("block range {lo}..={hi} is empty or starts at 0")));
        }
        check_coefficient(coefficient)?;
        let template = template.with_coord(running, lo);
        Ok(ConstantBlock { template, running, lo, hi, coefficient })
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn atom(&self) -> Atom {
        Atom::Block { template: self.template.clone(), running: self.running, lo: self.lo, hi: self.hi }
    }
}

fn check_coefficient(c: f64) -> Result<()> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidParams(format!("coefficient must be finite and nonzero, got {c}")));
    }
    Ok(())
}

/// One piece of a finite support: a single point or a run of points
/// along one coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Point(Index),
    Block { template: Index, running: usize, lo: u64, hi: u64 },
}

impl Atom {
    /// Number of points covered.
    pub fn len(&self) -> u64 {
        match self {
            Atom::Point(_) => 1,
            Atom::Block { lo, hi, .. } => hi - lo + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Representative point: the point itself, or the block's first point.
    pub fn template(&self) -> &Index {
        match self {
            Atom::Point(i) => i,
            Atom::Block { template, .. } => template,
        }
    }

    pub fn arity(&self) -> usize {
        self.template().arity()
    }

    pub fn running(&self) -> Option<usize> {
        match self {
            Atom::Point(_) => None,
            Atom::Block { running, .. } => Some(*running),
        }
    }

    pub fn is_block(&self) -> bool {
        matches!(self, Atom::Block { .. })
    }

    pub fn contains(&self, p: &Index) -> bool {
        match self {
            Atom::Point(i) => i == p,
            Atom::Block { template, running, lo, hi } => {
                p.arity() == template.arity()
                    && (*lo..=*hi).contains(&p.get(*running))
                    && p.coords().iter().zip(template.coords()).enumerate().all(|(k, (a, b))| k == *running || a == b)
            }
        }
    }

    /// All points, in increasing order.
    pub fn points(&self) -> Vec<Index> {
        match self {
            Atom::Point(i) => vec![i.clone()],
            Atom::Block { template, running, lo, hi } => {
                (*lo..=*hi).map(|t| template.with_coord(*running, t)).collect()
            }
        }
    }

    fn intersects(&self, other: &Atom) -> bool {
        match (self, other) {
            (Atom::Point(a), b) | (b, Atom::Point(a)) => b.contains(a),
            (
                Atom::Block { template: t1, running: r1, lo: lo1, hi: hi1 },
                Atom::Block { template: t2, running: r2, lo: lo2, hi: hi2 },
            ) => {
                if t1.arity() != t2.arity() {
                    return false;
                }
                let others_equal = (0..t1.arity()).all(|k| k == *r1 || k == *r2 || t1.get(k) == t2.get(k));
                if !others_equal {
                    return false;
                }
                if r1 == r2 {
                    lo1.max(lo2) <= hi1.min(hi2)
                } else {
                    (*lo1..=*hi1).contains(&t2.get(*r1)) && (*lo2..=*hi2).contains(&t1.get(*r2))
                }
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Point(i) => write!(f, "{i}"),
            Atom::Block { template, running, lo, hi } => {
                write!(f, "{template}[{}:{lo}..={hi}]", running + 1)
            }
        }
    }
}

/// A finite support: pairwise disjoint atoms in canonical order
/// (sorted by first point).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    arity: usize,
    atoms: Vec<Atom>,
}

impl Support {
    pub fn new(arity: usize, mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::SupportMismatch("support must be nonempty".into()));
        }
        for a in &atoms {
            if a.arity() != arity {
                return Err(Error::ArityMismatch { expected: arity, found: a.arity() });
            }
        }
        atoms.sort_by(|a, b| a.template().cmp(b.template()));
        check_disjoint(&atoms)?;
        Ok(Support { arity, atoms })
    }

    pub fn from_points(arity: usize, points: Vec<Index>) -> Result<Self> {
        Support::new(arity, points.into_iter().map(Atom::Point).collect())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total number of points once blocks are expanded.
    pub fn point_count(&self) -> u128 {
        self.atoms.iter().map(|a| a.len() as u128).sum()
    }

    pub fn has_blocks(&self) -> bool {
        self.atoms.iter().any(Atom::is_block)
    }

    /// Position of an atom equal to `atom`.
    pub fn position(&self, atom: &Atom) -> Option<usize> {
        self.atoms
            .binary_search_by(|a| a.template().cmp(atom.template()))
            .ok()
            .filter(|&i| &self.atoms[i] == atom)
    }

    /// Every block replaced by its points; `limit` caps the point count.
    pub fn expanded(&self, limit: u128) -> Result<Support> {
        let n = self.point_count();
        if n > limit {
            return Err(Error::Capacity { what: "expanded support points", needed: n, limit });
        }
        let atoms = self.atoms.iter().flat_map(|a| a.points()).map(Atom::Point).collect();
        Support::new(self.arity, atoms)
    }
}

fn check_disjoint(atoms: &[Atom]) -> Result<()> {
    let mut points = HashSet::new();
    let mut blocks = Vec::new();
    for a in atoms {
        match a {
            Atom::Point(p) => {
                if !points.insert(p.clone()) {
                    return Err(Error::SupportMismatch(format!("point {p} appears twice")));
                }
            }
            Atom::Block { .. } => blocks.push(a),
        }
    }
    for (i, b) in blocks.iter().enumerate() {
        for p in &points {
            if b.contains(p) {
                return Err(Error::SupportMismatch(format!("point {p} lies inside block {b}")));
            }
        }
        for c in &blocks[..i] {
            if b.intersects(c) {
                return Err(Error::SupportMismatch(format!("blocks {b} and {c} overlap")));
            }
        }
    }
    Ok(())
}

/// A finitely supported real vector on ℕ^m, with optional
/// constant-coefficient blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    arity: usize,
    entries: Vec<(Index, f64)>,
    blocks: Vec<ConstantBlock>,
}

impl SparseVector {
    pub fn new(arity: usize, entries: Vec<(Index, f64)>, blocks: Vec<ConstantBlock>) -> Result<Self> {
        for (i, c) in &entries {
            if i.arity() != arity {
                return Err(Error::ArityMismatch { expected: arity, found: i.arity() });
            }
            check_coefficient(*c)?;
        }
        for b in &blocks {
            if b.template.arity() != arity {
                return Err(Error::ArityMismatch { expected: arity, found: b.template.arity() });
            }
        }
        let v = SparseVector { arity, entries, blocks };
        // validates pairwise distinctness
        if !v.is_empty() {
            v.to_atoms()?;
        }
        Ok(v)
    }

    /// Convenience constructor from point coordinates.
    pub fn from_points(arity: usize, entries: &[(&[u64], f64)]) -> Result<Self> {
        let entries = entries
            .iter()
            .map(|(c, v)| Ok((Index::new(c.to_vec())?, *v)))
            .collect::<Result<Vec<_>>>()?;
        SparseVector::new(arity, entries, Vec::new())
    }

    /// A one-dimensional vector with coefficients at positions 1..=n.
    /// Zero coefficients are skipped.
    pub fn from_sequence(values: &[f64]) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (Index::from_raw(vec![i as u64 + 1]), *v))
            .collect();
        SparseVector::new(1, entries, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entries(&self) -> &[(Index, f64)] {
        &self.entries
    }

    pub fn blocks(&self) -> &[ConstantBlock] {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.blocks.is_empty()
    }

    pub fn point_count(&self) -> u128 {
        self.entries.len() as u128 + self.blocks.iter().map(|b| b.len() as u128).sum::<u128>()
    }

    /// Canonical support with coefficients aligned to its atoms.
    pub fn to_atoms(&self) -> Result<(Support, Vec<f64>)> {
        let mut pairs: Vec<(Atom, f64)> = self
            .entries
            .iter()
            .map(|(i, c)| (Atom::Point(i.clone()), *c))
            .chain(self.blocks.iter().map(|b| (b.atom(), b.coefficient)))
            .collect();
        pairs.sort_by(|a, b| a.0.template().cmp(b.0.template()));
        let coeffs = pairs.iter().map(|p| p.1).collect();
        let support = Support::new(self.arity, pairs.into_iter().map(|p| p.0).collect())?;
        Ok((support, coeffs))
    }

    /// Same vector with every block replaced by its points.
    pub fn expanded(&self) -> SparseVector {
        let mut entries = self.entries.clone();
        for b in &self.blocks {
            for p in b.atom().points() {
                entries.push((p, b.coefficient));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        SparseVector { arity: self.arity, entries, blocks: Vec::new() }
    }

    /// Coefficients by point, blocks expanded.
    pub fn to_map(&self) -> BTreeMap<Index, f64> {
        self.expanded().entries.into_iter().collect()
    }

    fn from_map(arity: usize, map: BTreeMap<Index, f64>) -> SparseVector {
        let entries = map.into_iter().filter(|(_, v)| *v != 0.0).collect();
        SparseVector { arity, entries, blocks: Vec::new() }
    }

    pub fn scaled(&self, s: f64) -> Result<SparseVector> {
        check_coefficient(s)?;
        let entries = self.entries.iter().map(|(i, c)| (i.clone(), c * s)).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|b| ConstantBlock { coefficient: b.coefficient * s, ..b.clone() })
            .collect();
        Ok(SparseVector { arity: self.arity, entries, blocks })
    }

    /// Coefficient signs flipped wherever `flip(point)` is true; blocks are
    /// flipped as a whole according to their first point.
    pub fn with_signs(&self, mut flip: impl FnMut(&Index) -> bool) -> SparseVector {
        let entries = self
            .entries
            .iter()
            .map(|(i, c)| (i.clone(), if flip(i) { -c } else { *c }))
            .collect();
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let c = if flip(&b.template) { -b.coefficient } else { b.coefficient };
                ConstantBlock { coefficient: c, ..b.clone() }
            })
            .collect();
        SparseVector { arity: self.arity, entries, blocks }
    }

    /// Pointwise sum (blocks expanded). Cancelled coordinates are dropped.
    pub fn add(&self, other: &SparseVector) -> Result<SparseVector> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: other.arity });
        }
        let mut map = self.to_map();
        for (i, c) in other.to_map() {
            *map.entry(i).or_insert(0.0) += c;
        }
        Ok(SparseVector::from_map(self.arity, map))
    }

    /// Elementary tensor u ⊗ v on ℕ^{m+k}. A block on one side times a
    /// point on the other stays a block; block times block is expanded on
    /// the right.
    pub fn tensor(&self, other: &SparseVector) -> Result<SparseVector> {
        let arity = self.arity + other.arity;
        let left = self.to_atoms()?;
        let right = other.expanded().to_atoms()?;
        let mut entries = Vec::new();
        let mut blocks = Vec::new();
        for (a, ca) in left.0.atoms().iter().zip(&left.1) {
            for (b, cb) in right.0.atoms().iter().zip(&right.1) {
                let idx = a.template().concat(b.template());
                let c = ca * cb;
                check_coefficient(c)?;
                match a {
                    Atom::Point(_) => entries.push((idx, c)),
                    Atom::Block { running, lo, hi, .. } => {
                        blocks.push(ConstantBlock::new(idx, *running, *lo, *hi, c)?)
                    }
                }
            }
        }
        SparseVector::new(arity, entries, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(c: &[u64]) -> Index {
        Index::new(c.to_vec()).unwrap()
    }

    #[test]
    fn zero_coordinate_rejected() {
        assert!(Index::new(vec![1, 0]).is_err());
    }

    #[test]
    fn overlapping_block_and_point_rejected() {
        let b = ConstantBlock::new(idx(&[1, 1]), 1, 1, 5, 1.0).unwrap();
        let err = SparseVector::new(2, vec![(idx(&[1, 3]), 2.0)], vec![b]).unwrap_err();
        assert!(matches!(err, Error::SupportMismatch(_)));
    }

    #[test]
    fn crossing_blocks_detected() {
        let b1 = ConstantBlock::new(idx(&[1, 3]), 0, 1, 5, 1.0).unwrap();
        let b2 = ConstantBlock::new(idx(&[2, 1]), 1, 1, 5, 1.0).unwrap();
        assert!(SparseVector::new(2, vec![], vec![b1.clone(), b2]).is_err());
        let b3 = ConstantBlock::new(idx(&[2, 1]), 1, 4, 5, 1.0).unwrap();
        assert!(SparseVector::new(2, vec![], vec![b1, b3]).is_ok());
    }

    #[test]
    fn expansion_preserves_points() {
        let b = ConstantBlock::new(idx(&[2, 9]), 1, 3, 6, 0.5).unwrap();
        let v = SparseVector::new(2, vec![(idx(&[1, 1]), 1.0)], vec![b]).unwrap();
        let e = v.expanded();
        assert_eq!(e.point_count(), 5);
        assert!(e.blocks().is_empty());
        assert_eq!(e.to_map()[&idx(&[2, 4])], 0.5);
    }

    #[test]
    fn support_position_lookup() {
        let s = Support::from_points(1, vec![idx(&[3]), idx(&[1])]).unwrap();
        assert_eq!(s.position(&Atom::Point(idx(&[3]))), Some(1));
        assert_eq!(s.position(&Atom::Point(idx(&[2]))), None);
    }
}
