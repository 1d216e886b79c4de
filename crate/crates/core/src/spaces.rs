//! Builders for named spaces, combinators, admissibility and the two
//! classification tables.

use std::fmt;

use crate::error::{Error, Result};
use crate::family::{check_p, Family, FamilyNode, PairPW};
use crate::partition::PartitionDescriptor as P;
use crate::weight::{symbolic_tail_queries, WeightDescriptor as W};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IsoType {
    Lp,
    L2,
    L2PlusLp,
    SumL2Lp,
    Xp,
    Unknown,
}

impl fmt::Display for IsoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IsoType::Lp => "l_p",
            IsoType::L2 => "l_2",
            IsoType::L2PlusLp => "l_2+l_p",
            IsoType::SumL2Lp => "(sum l_2)_p",
            IsoType::Xp => "X_p",
            IsoType::Unknown => "unknown",
        })
    }
}

pub fn make_lp(p: f64) -> Result<Family> {
    Family::explicit(p, 1, vec![PairPW::new(P::Discrete, W::One)])
}

pub fn make_l2(p: f64, w: W) -> Result<Family> {
    Family::explicit(p, 1, vec![PairPW::new(P::Indiscrete, w)])
}

/// Cells {n} × ℕ on ℕ².
pub fn make_sum_l2_lp(p: f64, w: W) -> Result<Family> {
    Family::explicit(p, 2, vec![PairPW::new(P::coordinate_grouping(vec![0]), w)])
}

/// max{ℓ_p, weighted ℓ_2}.
pub fn make_rosenthal_xp(p: f64, w: W) -> Result<Family> {
    Family::explicit(p, 1, vec![PairPW::new(P::Discrete, W::One), PairPW::new(P::Indiscrete, w)])
}

/// Four members on ℕ², labeled P0..P3: indiscrete with w_i·w'_j, rows
/// {n}×ℕ with w'_j, columns ℕ×{n} with w_i, discrete with 1.
pub fn make_schechtman(p: f64, w: W, w2: W) -> Result<Family> {
    let wi = W::lift(0, w);
    let wj = W::lift(1, w2);
    Family::explicit(
        p,
        2,
        vec![
            PairPW::new(P::Indiscrete, W::Product(vec![wi.clone(), wj.clone()])).labeled("P0"),
            PairPW::new(P::coordinate_grouping(vec![0]), wj).labeled("P1"),
            PairPW::new(P::coordinate_grouping(vec![1]), wi).labeled("P2"),
            PairPW::new(P::Discrete, W::One).labeled("P3"),
        ],
    )
}

/// Subset-lattice family on (ℕ²)^n.
pub fn make_yn(p: f64, n: usize, w: W) -> Result<Family> {
    Family::subset_lattice(p, n, w)
}

pub fn p2w_sum(children: Vec<Family>, w: W) -> Result<Family> {
    Family::sum(children, w)
}

/// Outer weight W(a) = (2^{-a-1})^{(p-2)/(2p)} for child a = 1, 2, ...
pub fn lp_sum_weight(p: f64) -> Result<W> {
    check_p(p)?;
    let r = 2f64.powf(-(p - 2.0) / (2.0 * p));
    Ok(W::Product(vec![W::constant(r)?, W::geometric(r)?]))
}

pub fn lp_sum(children: Vec<Family>) -> Result<Family> {
    let p = children.first().ok_or_else(|| Error::InvalidParams("sum needs at least one child".into()))?.p();
    Family::sum(children, lp_sum_weight(p)?)
}

/// ℓ_p-sum of X_{p,(1/n)} for n = 1..=count.
pub fn make_bp(p: f64, count: usize) -> Result<Family> {
    let children = (1..=count)
        .map(|n| make_rosenthal_xp(p, W::constant(1.0 / n as f64)?))
        .collect::<Result<Vec<_>>>()?;
    lp_sum(children)
}

pub fn tensor_family(f: Family, g: Family) -> Result<Family> {
    for h in [&f, &g] {
        if h.member_count().is_none() {
            return Err(Error::InvalidParams("tensor factors need finitely enumerable members".into()));
        }
    }
    Family::tensor(f, g)
}

/// Ordinal ω·q + r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrdinalDesc {
    pub q: u32,
    pub r: u32,
    /// Predecessors kept at limit stages.
    pub limit_truncation: u32,
}

impl OrdinalDesc {
    pub fn new(q: u32, r: u32, limit_truncation: u32) -> Result<Self> {
        if limit_truncation == 0 {
            return Err(Error::InvalidParams("limit truncation must be at least 1".into()));
        }
        Ok(OrdinalDesc { q, r, limit_truncation })
    }

    pub fn finite(r: u32) -> Self {
        OrdinalDesc { q: 0, r, limit_truncation: 1 }
    }
}

/// Outer weight of successor stages, 2^{(2-p)/(2p)} on both copies.
pub fn successor_weight(p: f64) -> Result<W> {
    check_p(p)?;
    W::constant(2f64.powf((2.0 - p) / (2.0 * p)))
}

/// X_p^α for α = ω·q + r: the base is one-dimensional ℓ_p, successors sum
/// two copies, limits sum the first L predecessors with outer weight 1.
pub fn xp_alpha(p: f64, alpha: OrdinalDesc) -> Result<Family> {
    check_p(p)?;
    if alpha.limit_truncation == 0 {
        return Err(Error::InvalidParams("limit truncation must be at least 1".into()));
    }
    if alpha.r > 0 {
        let prev = xp_alpha(p, OrdinalDesc { r: alpha.r - 1, ..alpha })?;
        return Family::sum(vec![prev.clone(), prev], successor_weight(p)?);
    }
    if alpha.q == 0 {
        let base = Family::explicit(p, 1, vec![PairPW::new(P::Discrete, W::One), PairPW::new(P::Indiscrete, W::One)])?;
        return base.with_domain(vec![1]);
    }
    let children = (0..alpha.limit_truncation)
        .map(|r| xp_alpha(p, OrdinalDesc { q: alpha.q - 1, r, ..alpha }))
        .collect::<Result<Vec<_>>>()?;
    Family::sum(children, W::One)
}

/// Adds (Discrete, 1) and an indiscrete member when missing. The default
/// indiscrete weight is the pointwise minimum of the existing weights for
/// explicit families and 1 otherwise.
pub fn make_admissible(f: &Family, indiscrete_weight: Option<W>) -> Result<Family> {
    if f.is_admissible() {
        return Ok(f.clone());
    }
    let arity = f.arity();
    let mut extra = Vec::new();
    if !f.has_discrete_one() {
        extra.push(PairPW::new(P::Discrete, W::One));
    }
    if !f.has_indiscrete() {
        let w = match (indiscrete_weight, f.node()) {
            (Some(w), _) => w,
            (None, FamilyNode::Explicit(ms)) => {
                let ws: Vec<W> = ms.iter().map(|m| m.weight.clone()).collect();
                if ws.len() == 1 {
                    ws.into_iter().next().expect("one weight")
                } else {
                    W::Min(ws)
                }
            }
            (None, _) => W::One,
        };
        extra.push(PairPW::new(P::Indiscrete, w));
    }
    let out = match f.explicit_members() {
        Some(ms) => {
            let mut all = ms.to_vec();
            all.extend(extra);
            Family::explicit(f.p(), arity, all)?
        }
        None => Family::union(vec![f.clone(), Family::explicit(f.p(), arity, extra)?])?,
    };
    match f.domain() {
        Some(d) => out.with_domain(d.to_vec()),
        None => Ok(out),
    }
}

/// Number of pieces of a kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    Zero,
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceSizes {
    None,
    AllSingletons,
    Bounded(u64),
    Unbounded,
}

/// Shape of a single partition: how many infinite pieces, and the number
/// and sizes of the finite ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeProfile {
    pub infinite_pieces: Count,
    pub finite_piece_sizes: PieceSizes,
    pub finite_pieces: Count,
}

impl SizeProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(format!("malformed profile: {m}")));
        if matches!(self.infinite_pieces, Count::Finite(0)) || matches!(self.finite_pieces, Count::Finite(0)) {
            return bad("use Zero for no pieces");
        }
        let no_finite = self.finite_pieces == Count::Zero;
        if no_finite != (self.finite_piece_sizes == PieceSizes::None) {
            return bad("finite piece sizes must be None exactly when there are no finite pieces");
        }
        if self.infinite_pieces == Count::Zero && no_finite {
            return bad("at least one piece is required");
        }
        if let PieceSizes::Bounded(0) = self.finite_piece_sizes {
            return bad("size bound must be at least 1");
        }
        if self.finite_piece_sizes == PieceSizes::Unbounded && self.finite_pieces != Count::Infinite {
            return bad("unbounded sizes need infinitely many finite pieces");
        }
        if self.infinite_pieces == Count::Zero && self.finite_pieces != Count::Infinite {
            return bad("finitely many finite pieces span a finite-dimensional space");
        }
        Ok(())
    }
}

/// Isomorphism type of a space given by one partition.
pub fn classify_single(profile: &SizeProfile) -> Result<IsoType> {
    profile.validate()?;
    if profile.infinite_pieces == Count::Infinite || profile.finite_piece_sizes == PieceSizes::Unbounded {
        return Ok(IsoType::SumL2Lp);
    }
    let many_finite = profile.finite_pieces == Count::Infinite;
    Ok(match (profile.infinite_pieces, many_finite) {
        (Count::Zero, _) => IsoType::Lp,
        (_, false) => IsoType::L2,
        (_, true) => IsoType::L2PlusLp,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub iso: IsoType,
    pub reason: String,
}

/// Isomorphism type of X_{p,w} from the symbolic tail of w.
pub fn classify_rosenthal(w: &W, p: f64) -> Result<Classification> {
    check_p(p)?;
    let q = match symbolic_tail_queries(w, p) {
        Ok(q) => q,
        Err(Error::Undecidable(reason)) => return Ok(Classification { iso: IsoType::Unknown, reason }),
        Err(e) => return Err(e),
    };
    let (iso, reason) = if q.inf_positive {
        (IsoType::L2, "inf w_n > 0")
    } else if q.power_sum_finite {
        (IsoType::Lp, "sum of w_n^{2p/(p-2)} is finite")
    } else if q.split {
        (IsoType::L2PlusLp, "a threshold splits a bounded-below part from a summable part")
    } else if q.star {
        (IsoType::Xp, "condition (*): small weights have divergent power sums")
    } else {
        (IsoType::Unknown, "no rule applies")
    };
    Ok(Classification { iso, reason: reason.into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{Index, SparseVector, Support};
    use crate::norm::{family_norm, lp_norm};
    use crate::restrict::{restrict_family, RestrictOptions};
    use proptest::prelude::*;

    fn seq(v: &[f64]) -> SparseVector {
        SparseVector::from_sequence(v).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn one_member_spaces() {
        assert!(close(family_norm(&seq(&[1.0, 1.0]), &make_lp(4.0).unwrap()).unwrap().value, 2f64.powf(0.25), 1e-15));
        assert_eq!(family_norm(&seq(&[3.0, 4.0]), &make_l2(4.0, W::One).unwrap()).unwrap().value, 5.0);
        let x = SparseVector::from_points(2, &[(&[1, 1], 1.0), (&[2, 1], 1.0)]).unwrap();
        let v = family_norm(&x, &make_sum_l2_lp(4.0, W::One).unwrap()).unwrap().value;
        assert!(close(v, 2f64.powf(0.25), 1e-15));
        assert_eq!(make_lp(2.0), Err(Error::InvalidExponent(2.0)));
    }

    #[test]
    fn rosenthal_with_unit_weight_is_l2() {
        let f = make_rosenthal_xp(4.0, W::One).unwrap();
        let x = seq(&[1.0, -2.0, 0.5]);
        assert_eq!(family_norm(&x, &f).unwrap().value, 5.25f64.sqrt());
    }

    #[test]
    fn schechtman_members_and_unit_norm() {
        let f = make_schechtman(4.0, W::PowerDecay(0.25), W::PowerDecay(0.25)).unwrap();
        assert_eq!(f.member_count(), Some(4));
        assert!(f.is_admissible());
        let e = SparseVector::from_points(2, &[(&[1, 1], 1.0)]).unwrap();
        assert_eq!(family_norm(&e, &f).unwrap().value, 1.0);
    }

    #[test]
    fn schechtman_matches_tensor_of_rosenthal() {
        let w = W::PowerDecay(0.25);
        let s = make_schechtman(4.0, w.clone(), w.clone()).unwrap();
        let t = tensor_family(make_rosenthal_xp(4.0, w.clone()).unwrap(), make_rosenthal_xp(4.0, w).unwrap()).unwrap();
        let x = SparseVector::from_points(2, &[(&[1, 1], 1.0), (&[2, 1], -0.5), (&[2, 3], 2.0), (&[5, 3], 0.25)])
            .unwrap();
        assert_eq!(family_norm(&x, &s).unwrap().value, family_norm(&x, &t).unwrap().value);
    }

    #[test]
    fn yn_has_lattice_members() {
        let f = make_yn(4.0, 3, W::PowerDecay(0.25)).unwrap();
        assert_eq!(f.member_count(), Some(8));
        assert!(f.is_admissible());
        assert_eq!(f.arity(), 6);
    }

    #[test]
    fn p2w_sum_of_lp_children() {
        let w = successor_weight(4.0).unwrap();
        let f = p2w_sum(vec![make_rosenthal_xp(4.0, W::One).unwrap(); 2], w).unwrap();
        let x = SparseVector::from_points(2, &[(&[1, 1], 1.0), (&[2, 1], 1.0)]).unwrap();
        assert!(close(family_norm(&x, &f).unwrap().value, 2f64.powf(0.25), 1e-15));
        let bad = make_lp(4.0).unwrap();
        assert!(matches!(p2w_sum(vec![bad], W::One), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn lp_sum_weights() {
        let w = lp_sum_weight(4.0).unwrap();
        for a in 1..6u64 {
            assert!(close(w.eval_seq(a), 2f64.powf(-((a + 1) as f64) / 4.0), 1e-15));
        }
        let total: f64 = (1..200u64).map(|a| w.eval_seq(a).powi(4)).sum();
        assert!(total < 1.0);
    }

    #[test]
    fn lp_sum_of_two_lp_children() {
        let child = make_rosenthal_xp(4.0, W::One).unwrap();
        let f = lp_sum(vec![child.clone(), child]).unwrap();
        let x = SparseVector::from_points(2, &[(&[1, 1], 1.0), (&[2, 1], 1.0)]).unwrap();
        let r = family_norm(&x, &f).unwrap();
        assert!(close(r.value, 2f64.powf(0.25), 1e-15));
        // ( ) member: (2^{-1} + 2^{-3/2})^{1/2}
        assert!((0.5 + 2f64.powf(-1.5)).sqrt() < r.value);
        assert_ne!(r.argmax_member, "()");
    }

    #[test]
    fn bp_builder() {
        let f = make_bp(4.0, 3).unwrap();
        assert_eq!(f.member_count(), Some(9));
    }

    #[test]
    fn tensor_rejects_envelope_factor() {
        let x = make_rosenthal_xp(4.0, W::One).unwrap();
        assert!(tensor_family(Family::envelope(x.clone()), x).is_err());
    }

    #[test]
    fn xp_alpha_examples() {
        let f1 = xp_alpha(4.0, OrdinalDesc::finite(1)).unwrap();
        let x = SparseVector::from_points(2, &[(&[1, 1], 1.0), (&[2, 1], 1.0)]).unwrap();
        assert!(close(family_norm(&x, &f1).unwrap().value, 2f64.powf(0.25), 1e-15));

        let f0 = xp_alpha(4.0, OrdinalDesc::finite(0)).unwrap();
        assert_eq!(family_norm(&seq(&[-3.0]), &f0).unwrap().value, 3.0);
        let off = SparseVector::from_points(1, &[(&[2], 1.0)]).unwrap();
        assert!(matches!(family_norm(&off, &f0), Err(Error::SupportMismatch(_))));

        // ω with two predecessors: the second branch is X^1, whose indiscrete
        // weight is 2^{-1/4}, so the glued ℓ_2 term is (1 + 2^{-1/2})^{1/2}
        let fw = xp_alpha(4.0, OrdinalDesc::new(1, 0, 2).unwrap()).unwrap();
        let x = SparseVector::from_points(3, &[(&[1, 1, 1], 1.0), (&[2, 1, 1], 1.0)]).unwrap();
        let v = family_norm(&x, &fw).unwrap().value;
        assert!(close(v, (1.0 + 0.5f64.sqrt()).sqrt(), 1e-15));
        assert!(v > 2f64.powf(0.25));
    }

    fn leaves(k: u32) -> Support {
        // every leaf of the binary tree of depth k: coordinates in {1,2}^k then 1
        let pts = (0..1u64 << k)
            .map(|m| {
                let mut c: Vec<u64> = (0..k).map(|i| (m >> i & 1) + 1).collect();
                c.push(1);
                Index::new(c).unwrap()
            })
            .collect();
        Support::from_points(k as usize + 1, pts).unwrap()
    }

    #[test]
    fn xp_alpha_member_counts_grow() {
        let mut last = 0;
        for k in 0..4 {
            let f = xp_alpha(4.0, OrdinalDesc::finite(k)).unwrap();
            let n = restrict_family(&f, &leaves(k), &RestrictOptions::default()).unwrap().len();
            assert!(n > last, "k = {k}: {n} members");
            last = n;
        }
    }

    #[test]
    fn admissible_completion() {
        let f = make_sum_l2_lp(4.0, W::Constant(0.5)).unwrap();
        let g = make_admissible(&f, None).unwrap();
        assert_eq!(g.member_count(), Some(3));
        assert!(g.is_admissible());
        assert_eq!(make_admissible(&g, None).unwrap(), g);
        let xp = make_rosenthal_xp(4.0, W::One).unwrap();
        assert_eq!(make_admissible(&xp, None).unwrap(), xp);
        let t = Family::tensor(make_lp(4.0).unwrap(), make_lp(4.0).unwrap()).unwrap();
        let u = make_admissible(&t, None).unwrap();
        assert!(u.is_admissible());
        assert_eq!(make_admissible(&u, None).unwrap(), u);
    }

    #[test]
    fn single_partition_table() {
        use Count::*;
        let prof = |i, s, f| SizeProfile { infinite_pieces: i, finite_piece_sizes: s, finite_pieces: f };
        assert_eq!(classify_single(&prof(Zero, PieceSizes::AllSingletons, Infinite)).unwrap(), IsoType::Lp);
        assert_eq!(classify_single(&prof(Zero, PieceSizes::Bounded(3), Infinite)).unwrap(), IsoType::Lp);
        assert_eq!(classify_single(&prof(Finite(1), PieceSizes::None, Zero)).unwrap(), IsoType::L2);
        assert_eq!(classify_single(&prof(Finite(2), PieceSizes::Bounded(2), Finite(5))).unwrap(), IsoType::L2);
        assert_eq!(
            classify_single(&prof(Finite(1), PieceSizes::AllSingletons, Infinite)).unwrap(),
            IsoType::L2PlusLp
        );
        assert_eq!(classify_single(&prof(Infinite, PieceSizes::None, Zero)).unwrap(), IsoType::SumL2Lp);
        assert_eq!(classify_single(&prof(Zero, PieceSizes::Unbounded, Infinite)).unwrap(), IsoType::SumL2Lp);
        assert!(classify_single(&prof(Zero, PieceSizes::None, Zero)).is_err());
        assert!(classify_single(&prof(Zero, PieceSizes::AllSingletons, Finite(3))).is_err());
        assert!(classify_single(&prof(Finite(1), PieceSizes::Unbounded, Finite(3))).is_err());
    }

    #[test]
    fn rosenthal_table() {
        let c = |w: W| classify_rosenthal(&w, 4.0).unwrap().iso;
        assert_eq!(c(W::Constant(0.5)), IsoType::L2);
        assert_eq!(c(W::PowerDecay(1.0)), IsoType::Lp);
        assert_eq!(c(W::interleave(W::Constant(0.9), W::PowerDecay(1.0))), IsoType::L2PlusLp);
        assert_eq!(c(W::PowerDecay(0.25)), IsoType::Xp);
        assert_eq!(c(W::lift(1, W::One)), IsoType::Unknown);
        assert!(classify_rosenthal(&W::One, 2.0).is_err());
    }

    #[test]
    fn rosenthal_builder_round_trip() {
        for w in [W::Constant(0.5), W::PowerDecay(1.0), W::PowerDecay(0.25)] {
            let f = make_rosenthal_xp(4.0, w.clone()).unwrap();
            let FamilyNode::Explicit(ms) = f.node() else { panic!() };
            assert_eq!(classify_rosenthal(&ms[1].weight, 4.0).unwrap(), classify_rosenthal(&w, 4.0).unwrap());
        }
    }

    /// max{(Σ_a ‖x_a‖^p)^{1/p}, (Σ_a W(a)² c_a² ‖x_a‖_2²)^{1/2}} for X_p
    /// children with constant indiscrete weights c_a.
    fn direct_sum_norm(blocks: &[Vec<f64>], c: &[f64], outer: &[f64], p: f64) -> f64 {
        let mut lp_part = 0.0;
        let mut l2_part = 0.0;
        for (a, xs) in blocks.iter().enumerate() {
            if xs.iter().all(|v| *v == 0.0) {
                continue;
            }
            let lp = xs.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            let l2 = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            lp_part += lp.max(c[a] * l2).powf(p);
            l2_part += (outer[a] * c[a] * l2).powi(2);
        }
        lp_part.powf(1.0 / p).max(l2_part.sqrt())
    }

    proptest! {
        #[test]
        fn sum_matches_direct_formula(
            blocks in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..4), 1..4),
            c in prop::collection::vec(0.05f64..1.0, 3),
            outer in 0.05f64..1.0,
        ) {
            let p = 4.0;
            let children: Vec<Family> = (0..blocks.len())
                .map(|a| make_rosenthal_xp(p, W::Constant(c[a])).unwrap())
                .collect();
            let f = p2w_sum(children, W::Constant(outer)).unwrap();
            let mut entries = Vec::new();
            for (a, xs) in blocks.iter().enumerate() {
                for (i, v) in xs.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    entries.push((Index::new(vec![a as u64 + 1, i as u64 + 1]).unwrap(), *v));
                }
            }
            let x = SparseVector::new(2, entries, vec![]).unwrap();
            prop_assume!(!x.is_empty());
            let want = direct_sum_norm(&blocks, &c, &[outer; 3], p);
            let got = family_norm(&x, &f).unwrap().value;
            prop_assert!(close(got, want, 1e-12), "{got} vs {want}");
        }

        #[test]
        fn make_admissible_never_decreases(v in prop::collection::vec(-3.0f64..3.0, 1..6), w in 0.05f64..1.0) {
            let x = SparseVector::new(
                2,
                v.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (Index::new(vec![i as u64 % 2 + 1, i as u64 + 1]).unwrap(), *c)).collect(),
                vec![],
            ).unwrap();
            prop_assume!(!x.is_empty());
            let f = make_sum_l2_lp(4.0, W::Constant(w)).unwrap();
            let g = make_admissible(&f, None).unwrap();
            let before = family_norm(&x, &f).unwrap().value;
            let after = family_norm(&x, &g).unwrap().value;
            prop_assert!(after >= before);
            prop_assert!(after >= lp_norm(&x, 4.0));
        }
    }
}
