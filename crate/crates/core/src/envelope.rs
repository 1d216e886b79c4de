//! Refinements P(Q,T), the envelope property, envelope norms and
//! distortion certificates.
//!
//! On a finite support the envelope norm is the max over assignments σ of
//! a member to every point: the refined pair has cells c ∩ σ⁻¹(k) for
//! c ∈ P_k. Any (Q,T) gives the assignment constant on Q-cells with the
//! same refined pair, and merging Q-cells that chose the same member only
//! merges cells, which cannot decrease the norm since t ↦ t^{p/2} is
//! superadditive.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::family::{Family, PairPW};
use crate::index::{SparseVector, Support};
use crate::norm::{coefficients_on, family_norm_with, pair_norm_coeffs, NormResult};
use crate::restrict::{
    for_each_set_partition, refine_restricted, refinement_count, restrict_family, restrict_pair, RestrictOptions, RestrictedFamily, RestrictedPair, RestrictedPartition,
};

/// Relative window in which fast scores are re-evaluated exactly.
const TIE_WINDOW: f64 = 1e-12;
/// Near-maximal assignments kept per search slice.
const MAX_CANDIDATES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvelopeCaps {
    pub max_points: usize,
    pub max_members: usize,
    /// Cap on |members|^|points|.
    pub max_assignments: u128,
}

impl Default for EnvelopeCaps {
    fn default() -> Self {
        EnvelopeCaps { max_points: 16, max_members: 8, max_assignments: 1 << 32 }
    }
}

/// A member of the restricted family chosen for every support atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub support: Arc<Support>,
    /// Member index per atom.
    pub members: Vec<usize>,
    /// Labels of the restricted members, by index.
    pub labels: Vec<String>,
}

impl Assignment {
    pub fn member_labels(&self) -> Vec<&str> {
        self.members.iter().map(|&k| self.labels[k].as_str()).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .support
            .atoms()
            .iter()
            .zip(&self.members)
            .map(|(a, &k)| format!("{a}->{}", self.labels[k]))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub norm: NormResult,
    pub assignment: Assignment,
}

/// Refined pair P(Q,T) from restricted members: `choice[q]` is the member
/// index used on Q-cell q.
pub fn refine(q: &RestrictedPartition, choice: &[usize], members: &RestrictedFamily) -> Result<RestrictedPair> {
    if choice.len() != q.len() {
        return Err(Error::InvalidParams(format!("{} Q-cells but {} choices", q.len(), choice.len())));
    }
    refine_restricted(&members.pairs, &q.labels(), choice)
}

/// Refined pair P(Q,T) with T given as descriptor pairs, one per Q-cell.
pub fn refine_pairs(q: &RestrictedPartition, t: &[PairPW], support: &Arc<Support>) -> Result<RestrictedPair> {
    if t.len() != q.len() {
        return Err(Error::InvalidParams(format!("{} Q-cells but {} pairs", q.len(), t.len())));
    }
    let members = t.iter().map(|pair| restrict_pair(pair, support)).collect::<Result<Vec<_>>>()?;
    let choice: Vec<usize> = (0..t.len()).collect();
    refine_restricted(&members, &q.labels(), &choice)
}

/// The refined pair whose cells are c ∩ σ⁻¹(k), c ∈ P_k.
pub fn assignment_pair(members: &RestrictedFamily, sigma: &[usize]) -> Result<RestrictedPair> {
    let identity: Vec<usize> = (0..members.len()).collect();
    refine_restricted(&members.pairs, sigma, &identity)
}

/// Per-point view of a restricted family on a point-only support.
struct PointTable {
    n: usize,
    k: usize,
    /// cell[k][pt], numbered from offset[k]
    cell: Vec<Vec<usize>>,
    weight: Vec<Vec<f64>>,
    slots: usize,
}

impl PointTable {
    fn new(rf: &RestrictedFamily) -> Self {
        let n = rf.support.len();
        let mut cell = Vec::new();
        let mut weight = Vec::new();
        let mut offset = 0;
        for pair in &rf.pairs {
            cell.push((0..n).map(|a| offset + pair.cell_of(a)).collect());
            weight.push(pair.weights().to_vec());
            offset += pair.cells().len();
        }
        PointTable { n, k: rf.pairs.len(), cell, weight, slots: offset }
    }

    /// Canonical key: restricted growth labels then weight bits.
    fn key_of(&self, label: impl Fn(usize) -> (usize, usize), weight: impl Fn(usize) -> f64) -> Vec<u64> {
        let mut seen: Vec<(usize, usize)> = Vec::new();
        let mut key = Vec::with_capacity(2 * self.n);
        for pt in 0..self.n {
            let l = label(pt);
            let id = match seen.iter().position(|s| *s == l) {
                Some(i) => i,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            };
            key.push(id as u64);
        }
        key.extend((0..self.n).map(|pt| weight(pt).to_bits()));
        key
    }

    fn member_key(&self, k: usize) -> Vec<u64> {
        self.key_of(|pt| (0, self.cell[k][pt]), |pt| self.weight[k][pt])
    }

    fn refined_key(&self, q_labels: &[usize], choice: &[usize]) -> Vec<u64> {
        self.key_of(
            |pt| (q_labels[pt], self.cell[choice[q_labels[pt]]][pt]),
            |pt| self.weight[choice[q_labels[pt]]][pt],
        )
    }
}

struct Search<'a> {
    table: &'a PointTable,
    /// t[k][pt] = (x·w_k)²
    t: Vec<Vec<f64>>,
    half: f64,
}

#[derive(Default)]
struct SliceBest {
    best: f64,
    candidates: Vec<(Vec<usize>, f64)>,
}

impl SliceBest {
    fn offer(&mut self, sigma: &[usize], score: f64) {
        if score > self.best * (1.0 + TIE_WINDOW) {
            self.best = score;
            let floor = score * (1.0 - TIE_WINDOW);
            self.candidates.retain(|c| c.1 >= floor);
        }
        if score >= self.best * (1.0 - TIE_WINDOW) && self.candidates.len() < MAX_CANDIDATES {
            self.candidates.push((sigma.to_vec(), score));
        }
        self.best = self.best.max(score);
    }
}

impl Search<'_> {
    fn f(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s.powf(self.half)
        }
    }

    fn dfs(&self, pos: usize, sigma: &mut Vec<usize>, sums: &mut [f64], total: f64, out: &mut SliceBest) {
        if pos == self.table.n {
            out.offer(sigma, total);
            return;
        }
        for k in 0..self.table.k {
            let slot = self.table.cell[k][pos];
            let old = sums[slot];
            let new = old + self.t[k][pos];
            sums[slot] = new;
            sigma.push(k);
            let next = total + self.f(new) - self.f(old);
            self.dfs(pos + 1, sigma, sums, next, out);
            sigma.pop();
            sums[slot] = old;
        }
    }

    fn run_prefix(&self, prefix: &[usize]) -> SliceBest {
        let mut sums = vec![0.0; self.table.slots];
        let mut total = 0.0;
        for (pos, &k) in prefix.iter().enumerate() {
            let slot = self.table.cell[k][pos];
            let old = sums[slot];
            sums[slot] += self.t[k][pos];
            total += self.f(sums[slot]) - self.f(old);
        }
        let mut out = SliceBest::default();
        let mut sigma = prefix.to_vec();
        self.dfs(prefix.len(), &mut sigma, &mut sums, total, &mut out);
        out
    }
}

fn prefixes(k: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..depth {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Exact envelope norm by search over all assignments σ.
pub fn envelope_norm_exact(x: &SparseVector, f: &Family) -> Result<EnvelopeResult> {
    envelope_norm_exact_with(x, f, &EnvelopeCaps::default(), &RestrictOptions::default())
}

pub fn envelope_norm_exact_with(
    x: &SparseVector,
    f: &Family,
    caps: &EnvelopeCaps,
    opts: &RestrictOptions,
) -> Result<EnvelopeResult> {
    if x.is_empty() {
        return Err(Error::InvalidParams("vector has empty support".into()));
    }
    if x.arity() != f.arity() {
        return Err(Error::ArityMismatch { expected: f.arity(), found: x.arity() });
    }
    let points = x.point_count();
    if points > caps.max_points as u128 {
        return Err(Error::Capacity { what: "envelope support points", needed: points, limit: caps.max_points as u128 });
    }
    let x = x.expanded();
    let (support, _) = x.to_atoms()?;
    let rf = restrict_family(f, &support, opts)?;
    if rf.len() > caps.max_members {
        return Err(Error::Capacity {
            what: "envelope restricted members",
            needed: rf.len() as u128,
            limit: caps.max_members as u128,
        });
    }
    let n = rf.support.len();
    let k = rf.len();
    let total = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > caps.max_assignments {
        return Err(Error::Capacity { what: "envelope assignments", needed: total, limit: caps.max_assignments });
    }

    let coeffs = coefficients_on(&x, &rf.pairs[0])?;
    let table = PointTable::new(&rf);
    let t = (0..k)
        .map(|m| (0..n).map(|pt| (coeffs[pt] * table.weight[m][pt]).powi(2)).collect())
        .collect();
    let search = Search { table: &table, t, half: f.p() / 2.0 };

    let mut depth = 0;
    while depth < n && (k as u128).pow(depth as u32) < 256 {
        depth += 1;
    }
    let slices: Vec<SliceBest> = prefixes(k, depth).par_iter().map(|pre| search.run_prefix(pre)).collect();
    let best = slices.iter().map(|s| s.best).fold(0.0, f64::max);
    let floor = best * (1.0 - TIE_WINDOW);

    let mut winner: Option<(f64, Vec<usize>, RestrictedPair)> = None;
    for (sigma, _) in slices.iter().flat_map(|s| &s.candidates).filter(|c| c.1 >= floor) {
        let pair = assignment_pair(&rf, sigma)?;
        let value = pair_norm_coeffs(&coeffs, &pair, f.p())?;
        if winner.as_ref().is_none_or(|w| value > w.0) {
            winner = Some((value, sigma.clone(), pair));
        }
    }
    let (value, sigma, _) = winner.expect("at least one assignment");
    let assignment =
        Assignment { support: rf.support.clone(), labels: rf.pairs.iter().map(|p| p.label().to_string()).collect(), members: sigma };
    let argmax = assignment.member_labels().join(",");
    Ok(EnvelopeResult {
        norm: NormResult { value, argmax_member: format!("sigma=[{argmax}]"), candidates_evaluated: total as usize },
        assignment,
    })
}

/// Pair norm of the refined pair induced by σ (member index per atom of
/// `members.support`).
pub fn envelope_lower_bound(x: &SparseVector, members: &RestrictedFamily, sigma: &[usize], p: f64) -> Result<f64> {
    if sigma.len() != members.support.len() {
        return Err(Error::SupportMismatch(format!(
            "assignment covers {} atoms, support has {}",
            sigma.len(),
            members.support.len()
        )));
    }
    if let Some(&k) = sigma.iter().find(|&&k| k >= members.len()) {
        return Err(Error::InvalidParams(format!("member {k} not in the restricted family")));
    }
    let pair = assignment_pair(members, sigma)?;
    let coeffs = coefficients_on(x, &pair)?;
    pair_norm_coeffs(&coeffs, &pair, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub given_norm: f64,
    pub envelope_lb: f64,
    pub ratio: f64,
    pub distance_lb: f64,
    pub witness: Assignment,
}

/// Where the envelope bound comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Exhaustive assignment search.
    Exact(EnvelopeCaps),
    /// A given assignment, by member label per atom of the restricted
    /// support of x.
    Labels(Vec<String>),
}

/// Ratio of an envelope lower bound to the family norm, with the distance
/// bound √ratio.
pub fn distortion_certificate(x: &SparseVector, f: &Family, witness: &Witness) -> Result<DistortionReport> {
    let opts = RestrictOptions::default();
    if x.is_empty() {
        return Err(Error::ZeroVector);
    }
    let given = family_norm_with(x, f, &opts)?;
    if given.value == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (envelope_lb, assignment) = match witness {
        Witness::Exact(caps) => {
            let r = envelope_norm_exact_with(x, f, caps, &opts)?;
            (r.norm.value, r.assignment)
        }
        Witness::Labels(labels) => {
            let (support, _) = x.to_atoms()?;
            let rf = restrict_family(f, &support, &opts)?;
            let sigma = labels
                .iter()
                .map(|l| rf.find_label(l).ok_or_else(|| Error::InvalidParams(format!("no restricted member {l}"))))
                .collect::<Result<Vec<_>>>()?;
            let value = envelope_lower_bound(x, &rf, &sigma, f.p())?;
            let assignment = Assignment {
                support: rf.support.clone(),
                labels: rf.pairs.iter().map(|p| p.label().to_string()).collect(),
                members: sigma,
            };
            (value, assignment)
        }
    };
    let ratio = envelope_lb / given.value;
    Ok(DistortionReport { given_norm: given.value, envelope_lb, ratio, distance_lb: ratio.sqrt(), witness: assignment })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Every (Q,T) within the caps.
    Exhaustive { max_points: usize, max_members: usize },
    /// Random (Q,T) draws; a `true` verdict is only probabilistic.
    Sampled { samples: u64, seed: u64 },
}

impl Default for CheckMode {
    fn default() -> Self {
        CheckMode::Exhaustive { max_points: 6, max_members: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    /// Q as atom lists.
    pub q: RestrictedPartition,
    /// Member label per Q-cell.
    pub t: Vec<String>,
    pub refined: RestrictedPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub holds: bool,
    pub probabilistic: bool,
    pub refinements_checked: u128,
    pub members: usize,
    pub counterexample: Option<Counterexample>,
}

/// Decides whether every refinement P(Q,T) of the restricted family is
/// again a restricted member.
pub fn has_envelope_property(f: &Family, support: &Support, mode: CheckMode) -> Result<EnvelopeCheck> {
    let opts = RestrictOptions::default();
    let points = support.expanded(opts.max_expanded_points)?;
    let rf = restrict_family(f, &points, &opts)?;
    let table = PointTable::new(&rf);
    let keys: HashSet<Vec<u64>> = (0..rf.len()).map(|k| table.member_key(k)).collect();
    let n = rf.support.len();
    let k = rf.len();
    let labels: Vec<String> = rf.pairs.iter().map(|p| p.label().to_string()).collect();
    let violation = |q_labels: &[usize], choice: &[usize]| -> Result<Counterexample> {
        Ok(Counterexample {
            q: RestrictedPartition::from_labels(q_labels),
            t: choice.iter().map(|&c| labels[c].clone()).collect(),
            refined: refine_restricted(&rf.pairs, q_labels, choice)?,
        })
    };

    match mode {
        CheckMode::Exhaustive { max_points, max_members } => {
            if n > max_points {
                return Err(Error::Capacity { what: "envelope check points", needed: n as u128, limit: max_points as u128 });
            }
            if k > max_members {
                return Err(Error::Capacity {
                    what: "envelope check members",
                    needed: k as u128,
                    limit: max_members as u128,
                });
            }
            let mut checked = 0u128;
            let mut found: Option<(Vec<usize>, Vec<usize>)> = None;
            for_each_set_partition(n, |rgs, cells| {
                let mut choice = vec![0usize; cells];
                loop {
                    checked += 1;
                    if !keys.contains(&table.refined_key(rgs, &choice)) {
                        found = Some((rgs.to_vec(), choice.clone()));
                        return false;
                    }
                    // last Q-cell varies fastest, so T runs in lexicographic order
                    let mut i = cells;
                    loop {
                        if i == 0 {
                            return true;
                        }
                        i -= 1;
                        choice[i] += 1;
                        if choice[i] < k {
                            break;
                        }
                        choice[i] = 0;
                    }
                }
            });
            let counterexample = found.map(|(q, t)| violation(&q, &t)).transpose()?;
            Ok(EnvelopeCheck {
                holds: counterexample.is_none(),
                probabilistic: false,
                refinements_checked: checked,
                members: k,
                counterexample,
            })
        }
        CheckMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in 0..samples {
                let raw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let q = RestrictedPartition::from_labels(&raw);
                let q_labels = q.labels();
                let choice: Vec<usize> = (0..q.len()).map(|_| rng.gen_range(0..k)).collect();
                if !keys.contains(&table.refined_key(&q_labels, &choice)) {
                    return Ok(EnvelopeCheck {
                        holds: false,
                        probabilistic: false,
                        refinements_checked: s as u128 + 1,
                        members: k,
                        counterexample: Some(violation(&q_labels, &choice)?),
                    });
                }
            }
            Ok(EnvelopeCheck {
                holds: true,
                probabilistic: true,
                refinements_checked: samples as u128,
                members: k,
                counterexample: None,
            })
        }
    }
}

/// Number of (Q,T) pairs an exhaustive check enumerates.
pub fn exhaustive_check_size(points: usize, members: usize) -> u128 {
    refinement_count(points, members as u128)
}

/// Best subset and value of max_q (Σ_{q}|a|^p + (Σ_{not q}|a w|²)^{p/2})^{1/p}.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub value: f64,
    /// 0-based positions in q, ascending.
    pub subset: Vec<usize>,
}

pub const MAX_SUBSET_LEN: usize = 24;

fn check_subset_input(a: &[f64], w: &[f64], p: f64) -> Result<()> {
    crate::family::check_p(p)?;
    if a.len() != w.len() {
        return Err(Error::InvalidParams(format!("{} coefficients but {} weights", a.len(), w.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidParams("no coefficients".into()));
    }
    if let Some(v) = a.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!("coefficient {v} is not finite")));
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::InvalidWeight(format!("{v}")));
    }
    Ok(())
}

/// Exact value for subset q, rounded the same way as the pair norm of the
/// matching assignment.
fn subset_value(a: &[f64], w: &[f64], p: f64, in_q: impl Fn(usize) -> bool) -> f64 {
    let half = p / 2.0;
    let mut outer = ExactSum::new();
    let mut rest = ExactSum::new();
    let mut any = false;
    for i in 0..a.len() {
        if a[i] == 0.0 {
            continue;
        }
        if in_q(i) {
            let t = a[i] * 1.0;
            outer.add((t * t).powf(half));
        } else {
            let t = a[i] * w[i];
            rest.add(t * t);
            any = true;
        }
    }
    if any {
        outer.add(rest.value().powf(half));
    }
    outer.value().powf(1.0 / p)
}

fn subset_of(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// Exact max over all 2^n subsets. Among equal maxima the subset whose
/// membership pattern, read from the first coordinate, is largest wins.
pub fn xp_envelope_subset(a: &[f64], w: &[f64], p: f64) -> Result<SubsetResult> {
    check_subset_input(a, w, p)?;
    let n = a.len();
    if n > MAX_SUBSET_LEN {
        return Err(Error::Capacity { what: "subset enumeration length", needed: n as u128, limit: MAX_SUBSET_LEN as u128 });
    }
    let half = p / 2.0;
    let lp: Vec<f64> = a.iter().map(|x| (x * x).powf(half)).collect();
    let l2: Vec<f64> = a.iter().zip(w).map(|(x, y)| (x * y) * (x * y)).collect();
    let score = |mask: u64| {
        let mut s = 0.0;
        let mut r = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                s += lp[i];
            } else {
                r += l2[i];
            }
        }
        s + r.powf(half)
    };
    let scores: Vec<f64> = (0..1u64 << n).into_par_iter().map(score).collect();
    let best = scores.iter().cloned().fold(0.0, f64::max);
    let floor = best * (1.0 - TIE_WINDOW);
    // pattern key: position i in q reads as member 0, so prefer q-heavy prefixes
    let pattern = |mask: u64| -> Vec<bool> { (0..n).map(|i| mask >> i & 1 == 0).collect() };
    let mut winner: Option<(f64, u64)> = None;
    for (mask, _) in scores.iter().enumerate().filter(|(_, s)| **s >= floor) {
        let mask = mask as u64;
        let v = subset_value(a, w, p, |i| mask >> i & 1 == 1);
        let better = match winner {
            None => true,
            Some((bv, bm)) => v > bv || (v == bv && pattern(mask) < pattern(bm)),
        };
        if better {
            winner = Some((v, mask));
        }
    }
    let (value, mask) = winner.expect("at least one subset");
    Ok(SubsetResult { value, subset: subset_of(mask, n) })
}

/// Fast candidate: sort by |a|^{p-2}/w² descending and try the n+1
/// prefixes. Always a lower bound for [`xp_envelope_subset`]; exactness is
/// observed on random sweeps but not proved.
pub fn xp_envelope_threshold(a: &[f64], w: &[f64], p: f64) -> Result<SubsetResult> {
    check_subset_input(a, w, p)?;
    let n = a.len();
    let ratio: Vec<f64> = (0..n).map(|i| a[i].abs().powf(p - 2.0) / (w[i] * w[i])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ratio[j].total_cmp(&ratio[i]).then(i.cmp(&j)));
    let mut in_q = vec![false; n];
    let mut best = SubsetResult { value: subset_value(a, w, p, |_| false), subset: Vec::new() };
    for &i in &order {
        in_q[i] = true;
        let v = subset_value(a, w, p, |j| in_q[j]);
        if v > best.value {
            let mut subset: Vec<usize> = (0..n).filter(|&j| in_q[j]).collect();
            subset.sort_unstable();
            best = SubsetResult { value: v, subset };
        }
    }
    Ok(best)
}

/// Values of all n+1 threshold prefixes, in prefix order.
pub fn threshold_prefix_values(a: &[f64], w: &[f64], p: f64) -> Result<Vec<(Vec<usize>, f64)>> {
    check_subset_input(a, w, p)?;
    let n = a.len();
    let ratio: Vec<f64> = (0..n).map(|i| a[i].abs().powf(p - 2.0) / (w[i] * w[i])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ratio[j].total_cmp(&ratio[i]).then(i.cmp(&j)));
    Ok((0..=n)
        .map(|len| {
            let prefix = order[..len].to_vec();
            let v = subset_value(a, w, p, |j| prefix.contains(&j));
            (prefix, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Index;
    use crate::partition::PartitionDescriptor as P;
    use crate::restrict::Cell;
    use crate::weight::WeightDescriptor as W;
    use proptest::prelude::*;

    fn xp_family(p: f64, w: &[f64]) -> Family {
        Family::explicit(
            p,
            1,
            vec![
                PairPW::new(P::Discrete, W::One),
                PairPW::new(P::Indiscrete, W::explicit(w.to_vec(), W::One).unwrap()),
            ],
        )
        .unwrap()
    }

    fn line(n: u64) -> Support {
        Support::from_points(1, (1..=n).map(|i| Index::new(vec![i]).unwrap()).collect()).unwrap()
    }

    #[test]
    fn refine_mixed_cells() {
        let s = Arc::new(line(3));
        let q = RestrictedPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let t = vec![PairPW::new(P::Discrete, W::One), PairPW::new(P::Indiscrete, W::Constant(0.3))];
        let r = refine_pairs(&q, &t, &s).unwrap();
        assert_eq!(r.cells(), &[Cell::Group(vec![0]), Cell::Group(vec![1]), Cell::Group(vec![2])]);
        assert_eq!(r.weights(), &[1.0, 1.0, 0.3]);
    }

    #[test]
    fn refine_with_one_cell_is_the_member() {
        let s = Arc::new(line(3));
        let q = RestrictedPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let m = PairPW::new(P::Indiscrete, W::Constant(0.3));
        let r = refine_pairs(&q, std::slice::from_ref(&m), &s).unwrap();
        assert!(r.same_structure(&restrict_pair(&m, &s).unwrap()));
    }

    #[test]
    fn xp_envelope_examples() {
        let x = SparseVector::from_sequence(&[1.0, 1.0]).unwrap();
        let r = envelope_norm_exact(&x, &xp_family(4.0, &[0.5, 0.5])).unwrap();
        assert!((r.norm.value - 2f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(r.assignment.members, vec![0, 0]);

        let x = SparseVector::from_sequence(&[1.0; 4]).unwrap();
        let f = xp_family(4.0, &[1.0, 1.0, 0.01, 0.01]);
        let r = envelope_norm_exact(&x, &f).unwrap();
        assert!((r.norm.value - 6f64.powf(0.25)).abs() < 1e-14);
        assert_eq!(r.assignment.members, vec![1, 1, 0, 0]);
        assert_eq!(r.norm.candidates_evaluated, 16);
    }

    #[test]
    fn single_coordinate_envelope_is_abs() {
        let x = SparseVector::from_sequence(&[-2.5]).unwrap();
        assert_eq!(envelope_norm_exact(&x, &xp_family(3.0, &[0.2])).unwrap().norm.value, 2.5);
    }

    #[test]
    fn caps_are_errors() {
        let x = SparseVector::from_sequence(&[1.0; 17]).unwrap();
        let f = xp_family(4.0, &[0.5; 17]);
        assert!(envelope_norm_exact(&x, &f).unwrap_err().is_capacity());
        let caps = EnvelopeCaps { max_assignments: 8, ..Default::default() };
        let x = SparseVector::from_sequence(&[1.0; 4]).unwrap();
        let err = envelope_norm_exact_with(&x, &f, &caps, &RestrictOptions::default()).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn xp_fails_envelope_property_on_two_points() {
        let f = xp_family(4.0, &[0.5, 0.5]);
        let check = has_envelope_property(&f, &line(2), CheckMode::default()).unwrap();
        assert!(!check.holds);
        let cx = check.counterexample.unwrap();
        assert_eq!(cx.q.cells(), &[vec![0], vec![1]]);
        assert_eq!(cx.t, vec!["m0".to_string(), "m1".to_string()]);
    }

    #[test]
    fn single_discrete_member_is_closed() {
        let f = Family::explicit(4.0, 1, vec![PairPW::new(P::Discrete, W::Constant(0.7))]).unwrap();
        assert!(has_envelope_property(&f, &line(4), CheckMode::default()).unwrap().holds);
        // Q splits a coarser cell, so a lone indiscrete member is closed only on one point
        let f = Family::explicit(4.0, 1, vec![PairPW::new(P::Indiscrete, W::Constant(0.7))]).unwrap();
        assert!(has_envelope_property(&f, &line(1), CheckMode::default()).unwrap().holds);
        let check = has_envelope_property(&f, &line(2), CheckMode::default()).unwrap();
        assert_eq!(check.counterexample.unwrap().q.cells(), &[vec![0], vec![1]]);
    }

    #[test]
    fn envelope_node_is_closed() {
        let f = Family::envelope(xp_family(4.0, &[0.5, 0.25, 0.5]));
        let mode = CheckMode::Exhaustive { max_points: 3, max_members: 64 };
        let check = has_envelope_property(&f, &line(3), mode).unwrap();
        assert!(check.holds, "{:?}", check.counterexample);
        assert_eq!(check.members, 15);
    }

    #[test]
    fn sampled_mode_is_flagged() {
        let f = Family::envelope(xp_family(4.0, &[0.5, 0.5]));
        let check =
            has_envelope_property(&f, &line(2), CheckMode::Sampled { samples: 100, seed: 1 }).unwrap();
        assert!(check.holds && check.probabilistic);
        let f = xp_family(4.0, &[0.5, 0.5, 0.5]);
        let check =
            has_envelope_property(&f, &line(3), CheckMode::Sampled { samples: 1000, seed: 1 }).unwrap();
        assert!(!check.holds && !check.probabilistic);
    }

    #[test]
    fn exhaustive_caps_enforced() {
        let f = Family::envelope(xp_family(4.0, &[0.5; 4]));
        assert!(has_envelope_property(&f, &line(4), CheckMode::default()).unwrap_err().is_capacity());
    }

    #[test]
    fn subset_examples() {
        let r = xp_envelope_subset(&[1.0, 1.0], &[0.5, 0.5], 4.0).unwrap();
        assert!((r.value - 2f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(r.subset, vec![0, 1]);
        let r = xp_envelope_subset(&[1.0; 4], &[1.0, 1.0, 0.01, 0.01], 4.0).unwrap();
        assert!((r.value - 6f64.powf(0.25)).abs() < 1e-14);
        assert_eq!(r.subset, vec![2, 3]);
        let r = xp_envelope_subset(&[-3.0], &[0.1], 5.0).unwrap();
        assert_eq!((r.value, r.subset), (3.0, vec![0]));
    }

    #[test]
    fn threshold_prefixes_match_hand_values() {
        let v = threshold_prefix_values(&[1.0; 4], &[1.0, 1.0, 0.01, 0.01], 4.0).unwrap();
        let order: Vec<Vec<usize>> = v.iter().map(|x| x.0.clone()).collect();
        assert_eq!(order, vec![vec![], vec![2], vec![2, 3], vec![2, 3, 0], vec![2, 3, 0, 1]]);
        let expect = [4.00080004f64, 5.00040001, 6.0, 4.0, 4.0].map(|v| v.powf(0.25));
        for ((_, got), want) in v.iter().zip(expect) {
            assert!((got - want).abs() < 1e-14 * want, "{got} vs {want}");
        }
        let best = xp_envelope_threshold(&[1.0; 4], &[1.0, 1.0, 0.01, 0.01], 4.0).unwrap();
        assert_eq!(best.subset, vec![2, 3]);
    }

    #[test]
    fn distortion_of_gap_example() {
        let x = SparseVector::from_sequence(&[1.0; 4]).unwrap();
        let f = xp_family(4.0, &[1.0, 1.0, 0.01, 0.01]);
        let r = distortion_certificate(&x, &f, &Witness::Exact(EnvelopeCaps::default())).unwrap();
        assert!((r.ratio - 6f64.powf(0.25) / 2.0002f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.distance_lb, r.ratio.sqrt());
    }

    #[test]
    fn labeled_witness() {
        let x = SparseVector::from_sequence(&[1.0; 4]).unwrap();
        let f = xp_family(4.0, &[1.0, 1.0, 0.01, 0.01]);
        let labels = ["m1", "m1", "m0", "m0"].map(String::from).to_vec();
        let r = distortion_certificate(&x, &f, &Witness::Labels(labels)).unwrap();
        assert!((r.envelope_lb - 6f64.powf(0.25)).abs() < 1e-14);
        let bad = distortion_certificate(&x, &f, &Witness::Labels(vec!["zz".into(); 4]));
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn subset_matches_assignment_search(
            a in prop::collection::vec(-4.0f64..4.0, 1..8),
            w in prop::collection::vec(0.01f64..1.0, 8),
            p in prop_oneof![Just(2.5), Just(3.0), Just(4.0), Just(6.0)],
        ) {
            let w = &w[..a.len()];
            if let Some(x) = SparseVector::from_sequence(&a).ok().filter(|x| !x.is_empty()) {
                let s = xp_envelope_subset(&a, w, p).unwrap();
                let e = envelope_norm_exact(&x, &xp_family(p, w)).unwrap();
                prop_assert_eq!(s.value, e.norm.value);
                let t = xp_envelope_threshold(&a, w, p).unwrap();
                prop_assert!(t.value <= s.value);
            }
        }

        #[test]
        fn envelope_dominates_given(
            a in prop::collection::vec(-4.0f64..4.0, 1..7),
            w in prop::collection::vec(0.01f64..1.0, 7),
        ) {
            if let Some(x) = SparseVector::from_sequence(&a).ok().filter(|x| !x.is_empty()) {
                let f = xp_family(4.0, &w[..a.len()]);
                let given = crate::norm::family_norm(&x, &f).unwrap().value;
                prop_assert!(envelope_norm_exact(&x, &f).unwrap().norm.value >= given);
            }
        }
    }
}
