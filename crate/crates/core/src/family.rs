//! Families of (partition, weight) pairs.

use crate::error::{Error, Result};
use crate::partition::PartitionDescriptor;
use crate::weight::WeightDescriptor;

/// One (partition, weight) pair of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPW {
    pub partition: PartitionDescriptor,
    pub weight: WeightDescriptor,
    pub label: Option<String>,
}

impl PairPW {
    pub fn new(partition: PartitionDescriptor, weight: WeightDescriptor) -> Self {
        PairPW { partition, weight, label: None }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        self.partition.validate(arity)?;
        self.weight.validate_for_arity(arity)
    }

    fn is_discrete_one(&self, arity: usize) -> bool {
        self.partition.is_discrete(arity) && self.weight.is_identically_one()
    }

    fn is_indiscrete(&self, arity: usize) -> bool {
        self.partition.is_indiscrete(arity)
    }
}

/// How the members of a family are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyNode {
    /// A finite list of descriptor pairs.
    Explicit(Vec<PairPW>),
    /// One member per I ⊆ {1..n} on (ℕ²)^n: cells fix the pairs in I,
    /// weight is Π_{k∉I} base(first coordinate of pair k).
    SubsetLattice { n: usize, base: WeightDescriptor },
    /// (p,2,W)-sum. Child a (1-based) lives on indices (a, b...) with the
    /// child's index padded by 1s up to the common arity.
    Sum { children: Vec<Family>, outer: WeightDescriptor },
    /// Products of members; indices are concatenations.
    Tensor(Box<Family>, Box<Family>),
    /// All refinements P(Q,T) of the inner family.
    Envelope(Box<Family>),
    /// Members of every part.
    Union(Vec<Family>),
}

/// Subsets I ⊆ {0..n-1} in member order: by size, then lexicographic;
/// for n = 3 the two-element sets follow the table order
/// {1,2}, {2,3}, {1,3} (1-based pairs).
pub fn lattice_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (0u64..(1u64 << n))
        .map(|mask| (0..n).filter(|k| mask >> k & 1 == 1).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    if n == 3 {
        // sorted: [], [0], [1], [2], [0,1], [0,2], [1,2], [0,1,2]
        subsets.swap(5, 6);
    }
    subsets
}

/// A family of partition/weight pairs with exponent p > 2 on ℕ^arity.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    p: f64,
    arity: usize,
    /// Optional upper bound per coordinate of the base set.
    domain: Option<Vec<u64>>,
    node: FamilyNode,
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

impl Family {
    pub fn explicit(p: f64, arity: usize, members: Vec<PairPW>) -> Result<Self> {
        check_p(p)?;
        if arity == 0 {
            return Err(Error::InvalidParams("arity must be at least 1".into()));
        }
        if members.is_empty() {
            return Err(Error::InvalidParams("family needs at least one member".into()));
        }
        for m in &members {
            m.validate(arity)?;
        }
        Ok(Family { p, arity, domain: None, node: FamilyNode::Explicit(members) })
    }

    pub fn subset_lattice(p: f64, n: usize, base: WeightDescriptor) -> Result<Self> {
        check_p(p)?;
        if n == 0 {
            return Err(Error::InvalidParams("subset lattice needs n ≥ 1".into()));
        }
        if n > 20 {
            return Err(Error::Capacity { what: "subset lattice members", needed: 1 << n, limit: 1 << 20 });
        }
        base.validate_for_arity(1)?;
        Ok(Family { p, arity: 2 * n, domain: None, node: FamilyNode::SubsetLattice { n, base } })
    }

    /// (p,2,W)-sum of admissible children sharing p.
    pub fn sum(children: Vec<Family>, outer: WeightDescriptor) -> Result<Self> {
        let first = children.first().ok_or_else(|| Error::InvalidParams("sum needs at least one child".into()))?;
        let p = first.p;
        for (a, c) in children.iter().enumerate() {
            if c.p != p {
                return Err(Error::InvalidParams(format!("child {} has p = {}, expected {p}", a + 1, c.p)));
            }
            if !c.is_admissible() {
                return Err(Error::NotAdmissible(format!(
                    "child {} lacks the discrete/trivial-weight or indiscrete member",
                    a + 1
                )));
            }
        }
        outer.validate_for_arity(1)?;
        let arity = 1 + children.iter().map(|c| c.arity).max().unwrap_or(0);
        Ok(Family { p, arity, domain: None, node: FamilyNode::Sum { children, outer } })
    }

    pub fn tensor(left: Family, right: Family) -> Result<Self> {
        if left.p != right.p {
            return Err(Error::InvalidParams(format!("tensor factors disagree on p: {} vs {}", left.p, right.p)));
        }
        Ok(Family {
            p: left.p,
            arity: left.arity + right.arity,
            domain: None,
            node: FamilyNode::Tensor(Box::new(left), Box::new(right)),
        })
    }

    pub fn envelope(inner: Family) -> Self {
        Family { p: inner.p, arity: inner.arity, domain: None, node: FamilyNode::Envelope(Box::new(inner)) }
    }

    pub fn union(parts: Vec<Family>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidParams("union needs at least one part".into()))?;
        let (p, arity) = (first.p, first.arity);
        for f in &parts {
            if f.p != p {
                return Err(Error::InvalidParams("union parts disagree on p".into()));
            }
            if f.arity != arity {
                return Err(Error::ArityMismatch { expected: arity, found: f.arity });
            }
        }
        Ok(Family { p, arity, domain: None, node: FamilyNode::Union(parts) })
    }

    /// Restricts the base set to the box Π [1, bound_k].
    pub fn with_domain(mut self, bounds: Vec<u64>) -> Result<Self> {
        if bounds.len() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: bounds.len() });
        }
        if bounds.contains(&0) {
            return Err(Error::InvalidParams("domain bounds must be ≥ 1".into()));
        }
        self.domain = Some(bounds);
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn node(&self) -> &FamilyNode {
        &self.node
    }

    pub fn domain(&self) -> Option<&[u64]> {
        self.domain.as_deref()
    }

    /// Contains the discrete partition with weight identically 1.
    pub fn has_discrete_one(&self) -> bool {
        match &self.node {
            FamilyNode::Explicit(ms) => ms.iter().any(|m| m.is_discrete_one(self.arity)),
            FamilyNode::SubsetLattice { .. } => true,
            FamilyNode::Sum { children, .. } => children.iter().all(Family::has_discrete_one),
            FamilyNode::Tensor(l, r) => l.has_discrete_one() && r.has_discrete_one(),
            FamilyNode::Envelope(inner) => inner.has_discrete_one(),
            FamilyNode::Union(parts) => parts.iter().any(Family::has_discrete_one),
        }
    }

    /// Contains the indiscrete partition with some weight.
    pub fn has_indiscrete(&self) -> bool {
        match &self.node {
            FamilyNode::Explicit(ms) => ms.iter().any(|m| m.is_indiscrete(self.arity)),
            FamilyNode::SubsetLattice { .. } | FamilyNode::Sum { .. } => true,
            FamilyNode::Tensor(l, r) => l.has_indiscrete() && r.has_indiscrete(),
            FamilyNode::Envelope(inner) => inner.has_indiscrete(),
            FamilyNode::Union(parts) => parts.iter().any(Family::has_indiscrete),
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.has_discrete_one() && self.has_indiscrete()
    }

    /// Number of members when the family is finite and enumerable without
    /// a support (Envelope families are not).
    pub fn member_count(&self) -> Option<u128> {
        match &self.node {
            FamilyNode::Explicit(ms) => Some(ms.len() as u128),
            FamilyNode::SubsetLattice { n, .. } => Some(1u128 << n),
            FamilyNode::Sum { children, .. } => {
                let mut prod = 1u128;
                for c in children {
                    prod = prod.checked_mul(c.member_count()?)?;
                }
                prod.checked_add(1)
            }
            FamilyNode::Tensor(l, r) => l.member_count()?.checked_mul(r.member_count()?),
            FamilyNode::Envelope(_) => None,
            FamilyNode::Union(parts) => parts.iter().try_fold(0u128, |acc, f| acc.checked_add(f.member_count()?)),
        }
    }

    /// Member list of an explicit family.
    pub(crate) fn explicit_members(&self) -> Option<&[PairPW]> {
        match &self.node {
            FamilyNode::Explicit(ms) => Some(ms),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xp() -> Family {
        Family::explicit(
            4.0,
            1,
            vec![
                PairPW::new(PartitionDescriptor::Discrete, WeightDescriptor::One),
                PairPW::new(PartitionDescriptor::Indiscrete, WeightDescriptor::Constant(0.5)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn lattice_order_matches_table_for_three_pairs() {
        let s = lattice_subsets(3);
        assert_eq!(s[4], vec![0, 1]);
        assert_eq!(s[5], vec![1, 2]);
        assert_eq!(s[6], vec![0, 2]);
        assert_eq!(s[7], vec![0, 1, 2]);
        assert_eq!(lattice_subsets(2), vec![vec![], vec![0], vec![1], vec![0, 1]]);
    }

    #[test]
    fn p_at_most_two_rejected() {
        let m = vec![PairPW::new(PartitionDescriptor::Discrete, WeightDescriptor::One)];
        assert_eq!(Family::explicit(2.0, 1, m.clone()), Err(Error::InvalidExponent(2.0)));
        assert!(Family::explicit(f64::NAN, 1, m).is_err());
    }

    #[test]
    fn admissibility() {
        assert!(xp().is_admissible());
        let only = Family::explicit(4.0, 1, vec![PairPW::new(PartitionDescriptor::Discrete, WeightDescriptor::One)]).unwrap();
        assert!(!only.is_admissible());
        assert!(Family::subset_lattice(4.0, 3, WeightDescriptor::PowerDecay(0.25)).unwrap().is_admissible());
        assert!(Family::tensor(xp(), xp()).unwrap().is_admissible());
    }

    #[test]
    fn sum_rejects_non_admissible_child() {
        let only = Family::explicit(4.0, 1, vec![PairPW::new(PartitionDescriptor::Discrete, WeightDescriptor::One)]).unwrap();
        assert!(matches!(Family::sum(vec![only], WeightDescriptor::One), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn sum_arity_and_member_count() {
        let s = Family::sum(vec![xp(), Family::tensor(xp(), xp()).unwrap()], WeightDescriptor::One).unwrap();
        assert_eq!(s.arity(), 3);
        assert_eq!(s.member_count(), Some(2 * 4 + 1));
    }
}
