//! Restriction of intensional families to a finite support.
//!
//! A restricted pair records, for every atom of the support, which cell it
//! falls in and its weight. Blocks stay compressed as long as their points
//! either share one cell (`Cell::Group`) or each sit alone in a cell of
//! their own (`Cell::Split`); anything else forces expansion.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::family::{lattice_subsets, Family, FamilyNode, PairPW};
use crate::index::{Atom, Index, Support};
use crate::partition::PartitionDescriptor;
use crate::weight::WeightDescriptor;

pub const DEFAULT_MAX_PAIRS: u128 = 1_000_000;
pub const DEFAULT_MAX_EXPANDED_POINTS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestrictOptions {
    /// Cap on the number of restricted pairs enumerated at any node.
    pub max_pairs: u128,
    /// Cap on points when blocks have to be expanded.
    pub max_expanded_points: u128,
}

impl Default for RestrictOptions {
    fn default() -> Self {
        RestrictOptions { max_pairs: DEFAULT_MAX_PAIRS, max_expanded_points: DEFAULT_MAX_EXPANDED_POINTS }
    }
}

/// A cell of a restricted partition, in terms of support atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    /// All points of these atoms form one cell.
    Group(Vec<usize>),
    /// Each point of this block atom is a singleton cell.
    Split(usize),
}

impl Cell {
    fn least(&self) -> usize {
        match self {
            Cell::Group(ids) => ids[0],
            Cell::Split(a) => *a,
        }
    }
}

/// Cell key of one atom while a restricted pair is being assembled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum AtomKey {
    Whole(Vec<u64>),
    /// Point t of the block has key `key` with `key[slot] = t`.
    Spread { key: Vec<u64>, slot: usize, lo: u64, hi: u64 },
}

const SPLIT_TAG: u64 = u64::MAX;

impl AtomKey {
    fn prefixed(self, prefix: &[u64]) -> AtomKey {
        match self {
            AtomKey::Whole(k) => AtomKey::Whole([prefix, &k].concat()),
            AtomKey::Spread { key, slot, lo, hi } => {
                AtomKey::Spread { key: [prefix, &key].concat(), slot: slot + prefix.len(), lo, hi }
            }
        }
    }

    fn concat(self, other: AtomKey) -> Result<AtomKey> {
        Ok(match (self, other) {
            (AtomKey::Whole(a), AtomKey::Whole(b)) => AtomKey::Whole([a, b].concat()),
            (AtomKey::Spread { key, slot, lo, hi }, AtomKey::Whole(b)) => {
                AtomKey::Spread { key: [key, b].concat(), slot, lo, hi }
            }
            (AtomKey::Whole(a), b @ AtomKey::Spread { .. }) => b.prefixed(&a),
            (AtomKey::Spread { .. }, AtomKey::Spread { .. }) => {
                return Err(Error::BlockCollision("a point cannot spread along two coordinates".into()))
            }
        })
    }
}

fn spread_hits_whole(key: &[u64], slot: usize, lo: u64, hi: u64, other: &[u64]) -> bool {
    key.len() == other.len()
        && (lo..=hi).contains(&other[slot])
        && key.iter().zip(other).enumerate().all(|(i, (a, b))| i == slot || a == b)
}

fn spreads_collide(a: (&[u64], usize, u64, u64), b: (&[u64], usize, u64, u64)) -> bool {
    let (k1, s1, lo1, hi1) = a;
    let (k2, s2, lo2, hi2) = b;
    if k1.len() != k2.len() {
        return false;
    }
    let others = k1.iter().zip(k2).enumerate().all(|(i, (x, y))| i == s1 || i == s2 || x == y);
    if !others {
        return false;
    }
    if s1 == s2 {
        lo1.max(lo2) <= hi1.min(hi2)
    } else {
        (lo1..=hi1).contains(&k2[s1]) && (lo2..=hi2).contains(&k1[s2])
    }
}

/// A partition of a finite support into cells of atoms, plus a weight per
/// atom (constant along blocks).
#[derive(Debug, Clone)]
pub struct RestrictedPair {
    support: Arc<Support>,
    cells: Vec<Cell>,
    atom_cell: Vec<usize>,
    weights: Vec<f64>,
    label: String,
}

impl RestrictedPair {
    /// Assembles a canonical pair from per-atom keys.
    pub(crate) fn from_keys(
        support: Arc<Support>,
        keys: Vec<AtomKey>,
        weights: Vec<f64>,
        label: String,
    ) -> Result<Self> {
        debug_assert_eq!(keys.len(), support.len());
        let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        let mut spreads = Vec::new();
        for (a, k) in keys.iter().enumerate() {
            match k {
                AtomKey::Whole(key) => groups.entry(key.clone()).or_default().push(a),
                AtomKey::Spread { key, slot, lo, hi } => spreads.push((a, key.as_slice(), *slot, *lo, *hi)),
            }
        }
        for (i, &(a, key, slot, lo, hi)) in spreads.iter().enumerate() {
            if let Some(other) = groups.keys().find(|k| spread_hits_whole(key, slot, lo, hi, k)) {
                let b = groups[other][0];
                return Err(Error::BlockCollision(format!(
                    "block {} shares a cell with {}",
                    support.atoms()[a],
                    support.atoms()[b]
                )));
            }
            for &(b, k2, s2, lo2, hi2) in &spreads[..i] {
                if spreads_collide((key, slot, lo, hi), (k2, s2, lo2, hi2)) {
                    return Err(Error::BlockCollision(format!(
                        "blocks {} and {} share cells",
                        support.atoms()[a],
                        support.atoms()[b]
                    )));
                }
            }
        }
        let mut cells: Vec<Cell> = groups.into_values().map(Cell::Group).collect();
        cells.extend(spreads.iter().map(|s| Cell::Split(s.0)));
        Ok(Self::from_cells(support, cells, weights, label))
    }

    fn from_cells(support: Arc<Support>, mut cells: Vec<Cell>, weights: Vec<f64>, label: String) -> Self {
        for c in &mut cells {
            if let Cell::Group(ids) = c {
                ids.sort_unstable();
            }
        }
        cells.sort_by_key(Cell::least);
        let mut atom_cell = vec![0; support.len()];
        for (ci, c) in cells.iter().enumerate() {
            match c {
                Cell::Group(ids) => ids.iter().for_each(|&a| atom_cell[a] = ci),
                Cell::Split(a) => atom_cell[*a] = ci,
            }
        }
        RestrictedPair { support, cells, atom_cell, weights, label }
    }

    /// Builds a pair from an explicit point partition (every atom must be a
    /// point) and per-point weights.
    pub fn from_point_cells(support: Arc<Support>, cells: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if support.has_blocks() {
            return Err(Error::SupportMismatch("explicit cells need a point-only support".into()));
        }
        if weights.len() != support.len() {
            return Err(Error::SupportMismatch("one weight per point required".into()));
        }
        RestrictedPartition::new(support.len(), cells.clone())?;
        for &w in &weights {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidWeight(format!("{w}")));
            }
        }
        Ok(Self::from_cells(support, cells.into_iter().map(Cell::Group).collect(), weights, "explicit".into()))
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Weight of each support atom.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn relabeled(mut self, label: String) -> Self {
        self.label = label;
        self
    }

    pub fn cell_of(&self, atom: usize) -> usize {
        self.atom_cell[atom]
    }

    /// Identical cells and bit-identical weights.
    pub fn same_structure(&self, other: &RestrictedPair) -> bool {
        self.support == other.support
            && self.cells == other.cells
            && self.weights.iter().map(|w| w.to_bits()).eq(other.weights.iter().map(|w| w.to_bits()))
    }

    pub(crate) fn structure_key(&self) -> (Vec<Cell>, Vec<u64>) {
        (self.cells.clone(), self.weights.iter().map(|w| w.to_bits()).collect())
    }

    pub(crate) fn atom_key(&self, atom: usize) -> AtomKey {
        match &self.cells[self.atom_cell[atom]] {
            Cell::Group(_) => AtomKey::Whole(vec![self.atom_cell[atom] as u64]),
            Cell::Split(a) => match &self.support.atoms()[*a] {
                Atom::Block { lo, hi, .. } => {
                    AtomKey::Spread { key: vec![SPLIT_TAG, *a as u64, 0], slot: 2, lo: *lo, hi: *hi }
                }
                Atom::Point(_) => unreachable!("split cells only hold blocks"),
            },
        }
    }

    /// Cells listed point by point; only sensible for small supports.
    pub fn point_cells(&self) -> Vec<Vec<Index>> {
        let atoms = self.support.atoms();
        let mut out = Vec::new();
        for c in &self.cells {
            match c {
                Cell::Group(ids) => {
                    let mut pts: Vec<Index> = ids.iter().flat_map(|&a| atoms[a].points()).collect();
                    pts.sort();
                    out.push(pts);
                }
                Cell::Split(a) => out.extend(atoms[*a].points().into_iter().map(|p| vec![p])),
            }
        }
        out.sort();
        out
    }

    /// Number of cells once blocks are expanded.
    pub fn cell_count(&self) -> u128 {
        self.cells
            .iter()
            .map(|c| match c {
                Cell::Group(_) => 1,
                Cell::Split(a) => self.support.atoms()[*a].len() as u128,
            })
            .sum()
    }

    /// Restriction of this pair to a sub-support of points: cells are
    /// intersected with the subset.
    pub fn restrict_to(&self, sub: &Arc<Support>) -> Result<RestrictedPair> {
        let mut keys = Vec::with_capacity(sub.len());
        let mut weights = Vec::with_capacity(sub.len());
        for atom in sub.atoms() {
            let a = self
                .support
                .position(atom)
                .ok_or_else(|| Error::SupportMismatch(format!("atom {atom} not in support")))?;
            keys.push(self.atom_key(a));
            weights.push(self.weights[a]);
        }
        RestrictedPair::from_keys(sub.clone(), keys, weights, self.label.clone())
    }
}

impl PartialEq for RestrictedPair {
    fn eq(&self, other: &Self) -> bool {
        self.same_structure(other)
    }
}

/// A partition of the atoms of a support (used as Q in refinements).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedPartition {
    cells: Vec<Vec<usize>>,
}

impl RestrictedPartition {
    pub fn new(n_atoms: usize, mut cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_atoms];
        for c in &mut cells {
            if c.is_empty() {
                return Err(Error::InvalidParams("partition cells must be nonempty".into()));
            }
            c.sort_unstable();
            for &a in c.iter() {
                if a >= n_atoms || seen[a] {
                    return Err(Error::InvalidParams(format!("atom {a} missing from support or repeated")));
                }
                seen[a] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParams("partition cells must cover the support".into()));
        }
        cells.sort_by_key(|c| c[0]);
        Ok(RestrictedPartition { cells })
    }

    /// Partition from a cell label per atom.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: HashMap<usize, Vec<usize>> = HashMap::new();
        for (a, &l) in labels.iter().enumerate() {
            map.entry(l).or_default().push(a);
        }
        let mut cells: Vec<Vec<usize>> = map.into_values().collect();
        cells.sort_by_key(|c| c[0]);
        RestrictedPartition { cells }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell number of every atom.
    pub fn labels(&self) -> Vec<usize> {
        let n = self.cells.iter().map(|c| c.len()).sum();
        let mut out = vec![0; n];
        for (i, c) in self.cells.iter().enumerate() {
            for &a in c {
                out[a] = i;
            }
        }
        out
    }
}

/// The restricted members of a family on a support. When blocks could not
/// stay compressed, `support` is the expanded support.
#[derive(Debug, Clone)]
pub struct RestrictedFamily {
    pub support: Arc<Support>,
    pub pairs: Vec<RestrictedPair>,
}

impl RestrictedFamily {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Position of the first member with this label.
    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.pairs.iter().position(|p| p.label == label)
    }

    pub fn contains(&self, pair: &RestrictedPair) -> bool {
        self.pairs.iter().any(|p| p.same_structure(pair))
    }
}

fn leaf_pair(
    support: &Arc<Support>,
    fixed: &[usize],
    weight: impl Fn(&Index) -> f64,
    constant_along: impl Fn(usize) -> bool,
    label: String,
) -> Result<RestrictedPair> {
    let mut keys = Vec::with_capacity(support.len());
    let mut weights = Vec::with_capacity(support.len());
    for atom in support.atoms() {
        let t = atom.template();
        let key: Vec<u64> = fixed.iter().map(|&k| t.get(k)).collect();
        match atom {
            Atom::Point(_) => keys.push(AtomKey::Whole(key)),
            Atom::Block { running, lo, hi, .. } => {
                if !constant_along(*running) {
                    return Err(Error::BlockCollision(format!("weight varies along block {atom}")));
                }
                match fixed.iter().position(|k| k == running) {
                    Some(slot) => keys.push(AtomKey::Spread { key, slot, lo: *lo, hi: *hi }),
                    None => keys.push(AtomKey::Whole(key)),
                }
            }
        }
        weights.push(weight(t));
    }
    RestrictedPair::from_keys(support.clone(), keys, weights, label)
}

fn check_arity(support: &Support, arity: usize) -> Result<()> {
    if support.arity() != arity {
        return Err(Error::ArityMismatch { expected: arity, found: support.arity() });
    }
    Ok(())
}

/// Restricts one descriptor pair to a support.
pub fn restrict_pair(pair: &PairPW, support: &Arc<Support>) -> Result<RestrictedPair> {
    let arity = support.arity();
    pair.validate(arity)?;
    let fixed = pair.partition.fixed_positions(arity);
    let label = pair.label.clone().unwrap_or_else(|| format!("{} / {}", pair.partition, pair.weight));
    leaf_pair(support, &fixed, |i| pair.weight.eval(i), |r| pair.weight.constant_along(r), label)
}

/// Weight of lattice member I at an index: Π_{k∉I} base(first coord of pair k),
/// multiplied in increasing k.
pub fn lattice_weight(base: &WeightDescriptor, n: usize, subset: &[usize], coords: &[u64]) -> f64 {
    (0..n)
        .filter(|k| !subset.contains(k))
        .fold(1.0, |acc, k| acc * base.eval_seq(coords[2 * k]))
}

pub fn lattice_label(subset: &[usize]) -> String {
    let s: Vec<String> = subset.iter().map(|k| (k + 1).to_string()).collect();
    format!("I={{{}}}", s.join(","))
}

/// Restricts a family to a support, expanding blocks if they cannot stay
/// compressed. Members are deduplicated structurally, first occurrence kept.
pub fn restrict_family(family: &Family, support: &Support, opts: &RestrictOptions) -> Result<RestrictedFamily> {
    check_arity(support, family.arity())?;
    let support = Arc::new(support.clone());
    match restrict_node(family, &support, opts) {
        Ok(pairs) => Ok(RestrictedFamily { support, pairs }),
        Err(Error::BlockCollision(_)) => {
            let expanded = Arc::new(support.expanded(opts.max_expanded_points)?);
            let pairs = restrict_node(family, &expanded, opts)?;
            Ok(RestrictedFamily { support: expanded, pairs })
        }
        Err(e) => Err(e),
    }
}

fn dedup(pairs: Vec<RestrictedPair>) -> Vec<RestrictedPair> {
    let mut seen = HashSet::new();
    pairs.into_iter().filter(|p| seen.insert(p.structure_key())).collect()
}

fn check_domain(family: &Family, support: &Support) -> Result<()> {
    let Some(bounds) = family.domain() else { return Ok(()) };
    for atom in support.atoms() {
        let t = atom.template();
        let mut ok = t.coords().iter().zip(bounds).all(|(c, b)| c <= b);
        if let Atom::Block { running, hi, .. } = atom {
            ok &= *hi <= bounds[*running];
        }
        if !ok {
            return Err(Error::SupportMismatch(format!("{atom} lies outside the base set")));
        }
    }
    Ok(())
}

fn check_cap(needed: u128, opts: &RestrictOptions) -> Result<()> {
    if needed > opts.max_pairs {
        return Err(Error::Capacity { what: "restricted pairs", needed, limit: opts.max_pairs });
    }
    Ok(())
}

pub(crate) fn restrict_node(family: &Family, support: &Arc<Support>, opts: &RestrictOptions) -> Result<Vec<RestrictedPair>> {
    check_arity(support, family.arity())?;
    check_domain(family, support)?;
    let arity = family.arity();
    match family.node() {
        FamilyNode::Explicit(members) => {
            check_cap(members.len() as u128, opts)?;
            let pairs = members
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let pair = restrict_pair(m, support)?;
                    Ok(match &m.label {
                        Some(_) => pair,
                        None => pair.relabeled(format!("m{i}")),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(dedup(pairs))
        }
        FamilyNode::SubsetLattice { n, base } => {
            check_cap(1u128 << n, opts)?;
            let pairs = lattice_subsets(*n)
                .into_iter()
                .map(|subset| {
                    let fixed = PartitionDescriptor::PairGrouping(subset.clone()).fixed_positions(arity);
                    leaf_pair(
                        support,
                        &fixed,
                        |i| lattice_weight(base, *n, &subset, i.coords()),
                        |r| r % 2 == 1 || subset.contains(&(r / 2)),
                        lattice_label(&subset),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(dedup(pairs))
        }
        FamilyNode::Sum { children, outer } => restrict_sum(children, outer, support, opts),
        FamilyNode::Tensor(left, right) => restrict_tensor(left, right, support, opts),
        FamilyNode::Envelope(inner) => restrict_envelope(inner, support, opts),
        FamilyNode::Union(parts) => {
            let mut all = Vec::new();
            for (i, part) in parts.iter().enumerate() {
                for pair in restrict_node(part, support, opts)? {
                    let label = format!("u{i}:{}", pair.label);
                    all.push(pair.relabeled(label));
                }
                check_cap(all.len() as u128, opts)?;
            }
            Ok(dedup(all))
        }
    }
}

/// Weights of the family's distinguished indiscrete member on the support.
pub(crate) fn indiscrete_weights(family: &Family, support: &Arc<Support>, opts: &RestrictOptions) -> Result<Vec<f64>> {
    let arity = family.arity();
    let block_check = |w: &dyn Fn(usize) -> bool| -> Result<()> {
        for atom in support.atoms() {
            if let Some(r) = atom.running() {
                if !w(r) {
                    return Err(Error::BlockCollision(format!("weight varies along block {atom}")));
                }
            }
        }
        Ok(())
    };
    match family.node() {
        FamilyNode::Explicit(members) => {
            let m = members
                .iter()
                .find(|m| m.partition.is_indiscrete(arity))
                .ok_or_else(|| Error::NotAdmissible("no indiscrete member".into()))?;
            block_check(&|r| m.weight.constant_along(r))?;
            Ok(support.atoms().iter().map(|a| m.weight.eval(a.template())).collect())
        }
        FamilyNode::SubsetLattice { n, base } => {
            block_check(&|r| r % 2 == 1)?;
            Ok(support.atoms().iter().map(|a| lattice_weight(base, *n, &[], a.template().coords())).collect())
        }
        FamilyNode::Sum { children, outer } => {
            let split = split_sum_support(children, support)?;
            let mut out = vec![0.0; support.len()];
            for part in &split {
                let child_w = indiscrete_weights(&children[part.child], &part.support, opts)?;
                let outer_w = outer.eval_seq(part.child as u64 + 1);
                for (&parent, &child_atom) in part.parent_atoms.iter().zip(&part.child_atoms) {
                    out[parent] = outer_w * child_w[child_atom];
                }
            }
            Ok(out)
        }
        FamilyNode::Tensor(left, right) => {
            let proj = project_tensor(left.arity(), support)?;
            let lw = indiscrete_weights(left, &proj.left, opts)?;
            let rw = indiscrete_weights(right, &proj.right, opts)?;
            Ok(proj.pairs.iter().map(|&(a, b)| lw[a] * rw[b]).collect())
        }
        FamilyNode::Envelope(inner) => indiscrete_weights(inner, support, opts),
        FamilyNode::Union(parts) => {
            let part = parts
                .iter()
                .find(|f| f.has_indiscrete())
                .ok_or_else(|| Error::NotAdmissible("no indiscrete member".into()))?;
            indiscrete_weights(part, support, opts)
        }
    }
}

struct SumPart {
    child: usize,
    support: Arc<Support>,
    /// parent atom ids belonging to this child
    parent_atoms: Vec<usize>,
    /// matching atom ids in the child support
    child_atoms: Vec<usize>,
}

fn split_sum_support(children: &[Family], support: &Support) -> Result<Vec<SumPart>> {
    let mut by_child: Vec<Vec<(usize, Atom)>> = vec![Vec::new(); children.len()];
    for (pa, atom) in support.atoms().iter().enumerate() {
        let t = atom.template();
        let a = t.get(0) as usize;
        if a > children.len() {
            return Err(Error::SupportMismatch(format!("{atom}: sum has {} children", children.len())));
        }
        let m = children[a - 1].arity();
        if t.coords()[1 + m..].iter().any(|&c| c != 1) {
            return Err(Error::SupportMismatch(format!("{atom}: padding coordinates of child {a} must be 1")));
        }
        let child_index = Index::from_raw(t.coords()[1..1 + m].to_vec());
        let child_atom = match atom {
            Atom::Point(_) => Atom::Point(child_index),
            Atom::Block { running, lo, hi, .. } => {
                if *running == 0 {
                    return Err(Error::BlockCollision(format!("block {atom} spans several children")));
                }
                if *running > m {
                    return Err(Error::SupportMismatch(format!("block {atom} runs along padding")));
                }
                Atom::Block { template: child_index, running: running - 1, lo: *lo, hi: *hi }
            }
        };
        by_child[a - 1].push((pa, child_atom));
    }
    let mut parts = Vec::new();
    for (child, atoms) in by_child.into_iter().enumerate() {
        if atoms.is_empty() {
            continue;
        }
        let child_support =
            Arc::new(Support::new(children[child].arity(), atoms.iter().map(|x| x.1.clone()).collect())?);
        let child_atoms = atoms.iter().map(|x| child_support.position(&x.1).expect("atom present")).collect();
        parts.push(SumPart {
            child,
            support: child_support,
            parent_atoms: atoms.iter().map(|x| x.0).collect(),
            child_atoms,
        });
    }
    Ok(parts)
}

fn restrict_sum(
    children: &[Family],
    outer: &WeightDescriptor,
    support: &Arc<Support>,
    opts: &RestrictOptions,
) -> Result<Vec<RestrictedPair>> {
    let parts = split_sum_support(children, support)?;
    let mut child_pairs = Vec::with_capacity(parts.len());
    let mut count: u128 = 1;
    for part in &parts {
        let pairs = restrict_node(&children[part.child], &part.support, opts)?;
        count = count.saturating_mul(pairs.len() as u128);
        child_pairs.push(pairs);
    }
    check_cap(count.saturating_add(1), opts)?;

    let mut out = Vec::with_capacity(count as usize + 1);
    let mut choice = vec![0usize; parts.len()];
    loop {
        let mut keys = vec![AtomKey::Whole(Vec::new()); support.len()];
        let mut weights = vec![0.0; support.len()];
        let mut label = String::from("(");
        for (pi, part) in parts.iter().enumerate() {
            let pair = &child_pairs[pi][choice[pi]];
            for (&parent, &ca) in part.parent_atoms.iter().zip(&part.child_atoms) {
                keys[parent] = pair.atom_key(ca).prefixed(&[part.child as u64 + 1]);
                weights[parent] = pair.weights[ca];
            }
            if pi > 0 {
                label.push(',');
            }
            label.push_str(&format!("{}:{}", part.child + 1, pair.label));
        }
        label.push(')');
        out.push(RestrictedPair::from_keys(support.clone(), keys, weights, label)?);

        // odometer
        let mut i = 0;
        loop {
            if i == parts.len() {
                break;
            }
            choice[i] += 1;
            if choice[i] < child_pairs[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == parts.len() {
            break;
        }
    }

    // the global indiscrete member ( )
    let mut weights = vec![0.0; support.len()];
    for part in &parts {
        let child_w = indiscrete_weights(&children[part.child], &part.support, opts)?;
        let outer_w = outer.eval_seq(part.child as u64 + 1);
        for (&parent, &ca) in part.parent_atoms.iter().zip(&part.child_atoms) {
            weights[parent] = outer_w * child_w[ca];
        }
    }
    let keys = vec![AtomKey::Whole(Vec::new()); support.len()];
    out.push(RestrictedPair::from_keys(support.clone(), keys, weights, "()".into())?);
    Ok(dedup(out))
}

struct TensorProjection {
    left: Arc<Support>,
    right: Arc<Support>,
    /// (left atom, right atom) for every parent atom
    pairs: Vec<(usize, usize)>,
}

fn project_tensor(left_arity: usize, support: &Support) -> Result<TensorProjection> {
    let right_arity = support.arity() - left_arity;
    let mut left_atoms = Vec::new();
    let mut right_atoms = Vec::new();
    let mut raw = Vec::new();
    for atom in support.atoms() {
        let t = atom.template().coords();
        let li = Index::from_raw(t[..left_arity].to_vec());
        let ri = Index::from_raw(t[left_arity..].to_vec());
        let (la, ra) = match atom {
            Atom::Point(_) => (Atom::Point(li), Atom::Point(ri)),
            Atom::Block { running, lo, hi, .. } if *running < left_arity => {
                (Atom::Block { template: li, running: *running, lo: *lo, hi: *hi }, Atom::Point(ri))
            }
            Atom::Block { running, lo, hi, .. } => {
                (Atom::Point(li), Atom::Block { template: ri, running: running - left_arity, lo: *lo, hi: *hi })
            }
        };
        if !left_atoms.contains(&la) {
            left_atoms.push(la.clone());
        }
        if !right_atoms.contains(&ra) {
            right_atoms.push(ra.clone());
        }
        raw.push((la, ra));
    }
    let to_support = |arity, atoms: Vec<Atom>| {
        let blocks = atoms.iter().any(Atom::is_block);
        Support::new(arity, atoms).map_err(|e| match e {
            Error::SupportMismatch(m) if blocks => Error::BlockCollision(m),
            e => e,
        })
    };
    let left = Arc::new(to_support(left_arity, left_atoms)?);
    let right = Arc::new(to_support(right_arity, right_atoms)?);
    let pairs = raw
        .iter()
        .map(|(la, ra)| (left.position(la).expect("present"), right.position(ra).expect("present")))
        .collect();
    Ok(TensorProjection { left, right, pairs })
}

fn restrict_tensor(left: &Family, right: &Family, support: &Arc<Support>, opts: &RestrictOptions) -> Result<Vec<RestrictedPair>> {
    let proj = project_tensor(left.arity(), support)?;
    let lp = restrict_node(left, &proj.left, opts)?;
    let rp = restrict_node(right, &proj.right, opts)?;
    check_cap((lp.len() as u128) * (rp.len() as u128), opts)?;
    let mut out = Vec::with_capacity(lp.len() * rp.len());
    for l in &lp {
        for r in &rp {
            let mut keys = Vec::with_capacity(support.len());
            let mut weights = Vec::with_capacity(support.len());
            for &(a, b) in &proj.pairs {
                keys.push(l.atom_key(a).concat(r.atom_key(b))?);
                weights.push(l.weights[a] * r.weights[b]);
            }
            let label = format!("[{}]x[{}]", l.label, r.label);
            out.push(RestrictedPair::from_keys(support.clone(), keys, weights, label)?);
        }
    }
    Ok(dedup(out))
}

/// Σ_k S(n,k)·m^k: the number of (Q, T) choices on n atoms with m members.
pub fn refinement_count(n: usize, m: u128) -> u128 {
    // Stirling numbers of the second kind, row by row
    let mut row = vec![1u128];
    for i in 1..=n {
        let mut next = vec![0u128; i + 1];
        for k in 1..=i {
            let a = if k < row.len() { row[k].saturating_mul(k as u128) } else { 0 };
            next[k] = a.saturating_add(row[k - 1]);
        }
        row = next;
    }
    let mut total = 0u128;
    let mut pow = 1u128;
    for s in row.iter() {
        total = total.saturating_add(s.saturating_mul(pow));
        pow = pow.saturating_mul(m);
    }
    total
}

/// Calls `f` with the restricted growth string of every set partition of
/// `n` elements, coarsest first, together with its number of cells.
pub fn for_each_set_partition(n: usize, mut f: impl FnMut(&[usize], usize) -> bool) {
    if n == 0 {
        return;
    }
    let mut rgs = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        let cells = maxes[n - 1].max(rgs[n - 1]) + 1;
        if !f(&rgs, cells) {
            return;
        }
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            let bound = maxes[i - 1] + 1;
            if rgs[i] < bound {
                rgs[i] += 1;
                let m = maxes[i - 1].max(rgs[i]);
                for j in i + 1..n {
                    rgs[j] = 0;
                    maxes[j - 1] = m;
                }
                if i + 1 < n {
                    maxes[n - 1] = m;
                }
                maxes[i] = m;
                break;
            }
            i -= 1;
        }
    }
}

/// Refinement P(Q,T) of restricted members: `q_labels` gives the Q-cell of
/// every atom and `choice[q]` the member assigned to Q-cell q.
pub fn refine_restricted(members: &[RestrictedPair], q_labels: &[usize], choice: &[usize]) -> Result<RestrictedPair> {
    let first = members.first().ok_or_else(|| Error::InvalidParams("no members to refine".into()))?;
    let support = first.support.clone();
    if q_labels.len() != support.len() {
        return Err(Error::SupportMismatch("partition does not cover the support".into()));
    }
    let mut keys = Vec::with_capacity(support.len());
    let mut weights = Vec::with_capacity(support.len());
    for (a, &q) in q_labels.iter().enumerate() {
        let k = *choice.get(q).ok_or_else(|| Error::InvalidParams(format!("no member for Q-cell {q}")))?;
        let m = members
            .get(k)
            .ok_or_else(|| Error::InvalidParams(format!("member {k} not in the restricted family")))?;
        if m.support != support {
            return Err(Error::SupportMismatch("members restricted to different supports".into()));
        }
        keys.push(m.atom_key(a).prefixed(&[q as u64]));
        weights.push(m.weights[a]);
    }
    let label = format!("Q={q_labels:?},T={choice:?}");
    RestrictedPair::from_keys(support, keys, weights, label)
}

fn restrict_envelope(inner: &Family, support: &Arc<Support>, opts: &RestrictOptions) -> Result<Vec<RestrictedPair>> {
    if support.has_blocks() {
        return Err(Error::BlockCollision("envelope families are enumerated point by point".into()));
    }
    let members = restrict_node(inner, support, opts)?;
    let n = support.len();
    check_cap(refinement_count(n, members.len() as u128), opts)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut err = None;
    for_each_set_partition(n, |rgs, cells| {
        let mut choice = vec![0usize; cells];
        loop {
            match refine_restricted(&members, rgs, &choice) {
                Ok(pair) => {
                    if seen.insert(pair.structure_key()) {
                        out.push(pair);
                    }
                }
                Err(e) => {
                    err = Some(e);
                    return false;
                }
            }
            let mut i = 0;
            while i < cells {
                choice[i] += 1;
                if choice[i] < members.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == cells {
                return true;
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::WeightDescriptor as W;

    fn pts(arity: usize, list: &[&[u64]]) -> Arc<Support> {
        Arc::new(Support::from_points(arity, list.iter().map(|c| Index::new(c.to_vec()).unwrap()).collect()).unwrap())
    }

    #[test]
    fn discrete_on_two_points() {
        let s = pts(1, &[&[1], &[2]]);
        let rp = restrict_pair(&PairPW::new(PartitionDescriptor::Discrete, W::One), &s).unwrap();
        assert_eq!(rp.cells(), &[Cell::Group(vec![0]), Cell::Group(vec![1])]);
        assert_eq!(rp.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn indiscrete_on_three_points() {
        let s = pts(1, &[&[1], &[2], &[3]]);
        let rp = restrict_pair(&PairPW::new(PartitionDescriptor::Indiscrete, W::One), &s).unwrap();
        assert_eq!(rp.cells(), &[Cell::Group(vec![0, 1, 2])]);
    }

    #[test]
    fn pair_grouping_groups_by_first_pair() {
        let s = pts(6, &[&[1, 1, 2, 1, 3, 1], &[1, 2, 2, 1, 3, 1], &[1, 1, 2, 2, 3, 1]]);
        let rp = restrict_pair(&PairPW::new(PartitionDescriptor::pair_grouping(vec![0]), W::One), &s).unwrap();
        let idx = |c: &[u64]| Index::new(c.to_vec()).unwrap();
        assert_eq!(
            rp.point_cells(),
            vec![vec![idx(&[1, 1, 2, 1, 3, 1]), idx(&[1, 1, 2, 2, 3, 1])], vec![idx(&[1, 2, 2, 1, 3, 1])]]
        );
    }

    #[test]
    fn arity_mismatch_reported() {
        let s = pts(2, &[&[1, 1]]);
        let f = Family::explicit(4.0, 1, vec![PairPW::new(PartitionDescriptor::Discrete, W::One)]).unwrap();
        assert!(matches!(
            restrict_family(&f, &s, &RestrictOptions::default()),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn lattice_on_single_point_dedups_by_weight() {
        let f = Family::subset_lattice(4.0, 3, W::PowerDecay(0.25)).unwrap();
        let s = pts(6, &[&[16, 1, 16, 1, 16, 1]]);
        let r = restrict_family(&f, &s, &RestrictOptions::default()).unwrap();
        // weights 0.5^{3 - |I|}: four distinct values
        assert_eq!(r.len(), 4);
        let s = pts(6, &[&[1, 1, 1, 1, 1, 1]]);
        let r = restrict_family(&f, &s, &RestrictOptions::default()).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn sum_restriction_ignores_untouched_children() {
        let one = |w: f64| {
            Family::explicit(
                4.0,
                1,
                vec![
                    PairPW::new(PartitionDescriptor::Discrete, W::One),
                    PairPW::new(PartitionDescriptor::Indiscrete, W::Constant(w)),
                ],
            )
            .unwrap()
        };
        let sum = Family::sum(vec![one(0.5), one(0.25)], W::Constant(0.5)).unwrap();
        let s = pts(2, &[&[1, 1], &[1, 2]]);
        let r = restrict_family(&sum, &s, &RestrictOptions::default()).unwrap();
        // child 1 contributes 2 restrictions, plus ( )
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn capacity_error_not_truncation() {
        let f = Family::subset_lattice(4.0, 3, W::PowerDecay(0.25)).unwrap();
        let s = pts(6, &[&[16, 1, 16, 1, 16, 1]]);
        let opts = RestrictOptions { max_pairs: 4, ..Default::default() };
        assert!(matches!(restrict_family(&f, &s, &opts), Err(Error::Capacity { .. })));
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        for (n, bell) in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52), (6, 203)] {
            let mut count = 0;
            for_each_set_partition(n, |_, _| {
                count += 1;
                true
            });
            assert_eq!(count, bell, "n = {n}");
        }
    }

    #[test]
    fn set_partition_cell_counts() {
        let mut seen = Vec::new();
        for_each_set_partition(3, |rgs, k| {
            seen.push((rgs.to_vec(), k));
            true
        });
        assert_eq!(seen[0], (vec![0, 0, 0], 1));
        assert!(seen.contains(&(vec![0, 1, 2], 3)));
        assert!(seen.contains(&(vec![0, 1, 0], 2)));
        for (rgs, k) in seen {
            assert_eq!(rgs.iter().max().unwrap() + 1, k);
        }
    }

    #[test]
    fn refinement_count_matches_touchard() {
        // Σ_k S(2,k) 2^k = 2 + 4
        assert_eq!(refinement_count(2, 2), 6);
        assert_eq!(refinement_count(4, 2), 94);
        assert_eq!(refinement_count(3, 1), 5);
    }
}
