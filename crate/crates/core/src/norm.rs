//! Single-pair norms and family sup-norms on finitely supported vectors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::family::{check_p, Family};
use crate::index::SparseVector;
use crate::restrict::{restrict_family, Cell, RestrictOptions, RestrictedFamily, RestrictedPair};

#[derive(Debug, Clone, PartialEq)]
pub struct NormResult {
    pub value: f64,
    /// Label of the first restricted pair attaining the max.
    pub argmax_member: String,
    pub candidates_evaluated: usize,
}

/// Coefficient of x on every atom of the pair's support (0 off supp x).
pub(crate) fn coefficients_on(x: &SparseVector, rp: &RestrictedPair) -> Result<Vec<f64>> {
    let support = rp.support();
    let try_map = |x: &SparseVector| -> Result<Vec<f64>> {
        if x.arity() != support.arity() {
            return Err(Error::ArityMismatch { expected: support.arity(), found: x.arity() });
        }
        let (xs, coeffs) = x.to_atoms()?;
        let mut out = vec![0.0; support.len()];
        for (atom, c) in xs.atoms().iter().zip(coeffs) {
            let a = support
                .position(atom)
                .ok_or_else(|| Error::SupportMismatch(format!("{atom} is outside the restricted support")))?;
            out[a] = c;
        }
        Ok(out)
    };
    match try_map(x) {
        Err(Error::SupportMismatch(_)) if !x.blocks().is_empty() => try_map(&x.expanded()),
        r => r,
    }
}

/// (Σ_cells (Σ_{j∈cell} x_j² w_j²)^{p/2})^{1/p}.
pub fn pair_norm(x: &SparseVector, rp: &RestrictedPair, p: f64) -> Result<f64> {
    check_p(p)?;
    let coeffs = coefficients_on(x, rp)?;
    pair_norm_coeffs(&coeffs, rp, p)
}

/// Pair norm for coefficients already aligned with the pair's atoms.
pub(crate) fn pair_norm_coeffs(coeffs: &[f64], rp: &RestrictedPair, p: f64) -> Result<f64> {
    let atoms = rp.support().atoms();
    let w = rp.weights();
    let half = p / 2.0;
    let mut outer = ExactSum::new();
    for cell in rp.cells() {
        match cell {
            Cell::Group(ids) => {
                let mut inner = ExactSum::new();
                let mut any = false;
                for &a in ids {
                    if coeffs[a] != 0.0 {
                        let t = coeffs[a] * w[a];
                        inner.add_repeated(t * t, atoms[a].len());
                        any = true;
                    }
                }
                if any {
                    outer.add(inner.value().powf(half));
                }
            }
            Cell::Split(a) => {
                if coeffs[*a] != 0.0 {
                    let t = coeffs[*a] * w[*a];
                    outer.add_repeated((t * t).powf(half), atoms[*a].len());
                }
            }
        }
    }
    let total = outer.value();
    if !total.is_finite() {
        return Err(Error::NonFinite("pair norm"));
    }
    let value = total.powf(1.0 / p);
    if !value.is_finite() {
        return Err(Error::NonFinite("pair norm"));
    }
    Ok(value)
}

/// Max over a list of values; ties keep the first index.
pub(crate) fn first_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Evaluates every restricted pair and returns the max.
pub fn max_over_restricted(x: &SparseVector, rf: &RestrictedFamily, p: f64) -> Result<NormResult> {
    if rf.is_empty() {
        return Err(Error::InvalidParams("empty restricted family".into()));
    }
    let coeffs = coefficients_on(x, &rf.pairs[0])?;
    let values: Vec<f64> = rf
        .pairs
        .par_iter()
        .map(|rp| pair_norm_coeffs(&coeffs, rp, p))
        .collect::<Result<Vec<_>>>()?;
    let i = first_argmax(&values).expect("nonempty");
    Ok(NormResult { value: values[i], argmax_member: rf.pairs[i].label().to_string(), candidates_evaluated: values.len() })
}

/// sup_k ‖x‖_{(P_k,W_k)}; over a finite support the sup is a max.
pub fn family_norm(x: &SparseVector, f: &Family) -> Result<NormResult> {
    family_norm_with(x, f, &RestrictOptions::default())
}

pub fn family_norm_with(x: &SparseVector, f: &Family, opts: &RestrictOptions) -> Result<NormResult> {
    if x.is_empty() {
        return Err(Error::InvalidParams("vector has empty support".into()));
    }
    if x.arity() != f.arity() {
        return Err(Error::ArityMismatch { expected: f.arity(), found: x.arity() });
    }
    let (support, _) = x.to_atoms()?;
    let rf = restrict_family(f, &support, opts)?;
    max_over_restricted(x, &rf, f.p())
}

/// (Σ|x_j|^p)^{1/p}, rounded exactly like the discrete pair norm.
pub fn lp_norm(x: &SparseVector, p: f64) -> f64 {
    let half = p / 2.0;
    let mut s = ExactSum::new();
    for (_, c) in x.entries() {
        s.add((c * c).powf(half));
    }
    for b in x.blocks() {
        s.add_repeated((b.coefficient * b.coefficient).powf(half), b.len());
    }
    s.value().powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::PairPW;
    use crate::index::{ConstantBlock, Index, Support};
    use crate::partition::PartitionDescriptor as P;
    use crate::restrict::restrict_pair;
    use crate::weight::WeightDescriptor as W;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn support_of(x: &SparseVector) -> Arc<Support> {
        Arc::new(x.to_atoms().unwrap().0)
    }

    fn xp(w: f64) -> Family {
        Family::explicit(4.0, 1, vec![PairPW::new(P::Discrete, W::One), PairPW::new(P::Indiscrete, W::Constant(w))])
            .unwrap()
    }

    #[test]
    fn discrete_pair_is_lp() {
        let x = SparseVector::from_sequence(&[1.0, 1.0]).unwrap();
        let rp = restrict_pair(&PairPW::new(P::Discrete, W::One), &support_of(&x)).unwrap();
        let v = pair_norm(&x, &rp, 4.0).unwrap();
        assert!((v - 2f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn indiscrete_pair_is_weighted_l2() {
        let x = SparseVector::from_sequence(&[1.0, 1.0]).unwrap();
        let rp = restrict_pair(&PairPW::new(P::Indiscrete, W::Constant(0.5)), &support_of(&x)).unwrap();
        assert!((pair_norm(&x, &rp, 4.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn explicit_cells_hand_value() {
        let x = SparseVector::from_sequence(&[3.0, 4.0, 2.0]).unwrap();
        let rp = RestrictedPair::from_point_cells(support_of(&x), vec![vec![0, 1], vec![2]], vec![1.0; 3]).unwrap();
        let v = pair_norm(&x, &rp, 4.0).unwrap();
        assert!((v - 641f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn points_outside_pair_support_rejected() {
        let x = SparseVector::from_sequence(&[1.0, 1.0]).unwrap();
        let small = SparseVector::from_sequence(&[1.0]).unwrap();
        let rp = restrict_pair(&PairPW::new(P::Discrete, W::One), &support_of(&small)).unwrap();
        assert!(matches!(pair_norm(&x, &rp, 4.0), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn overflow_reported() {
        let x = SparseVector::from_sequence(&[1e200, 1e200]).unwrap();
        let rp = restrict_pair(&PairPW::new(P::Discrete, W::One), &support_of(&x)).unwrap();
        assert_eq!(pair_norm(&x, &rp, 4.0), Err(Error::NonFinite("pair norm")));
    }

    #[test]
    fn xp_family_norm() {
        let x = SparseVector::from_sequence(&[1.0, 1.0]).unwrap();
        let r = family_norm(&x, &xp(0.5)).unwrap();
        assert!((r.value - 2f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(r.argmax_member, "m0");
        assert_eq!(r.candidates_evaluated, 2);
    }

    #[test]
    fn unit_vector_has_norm_one() {
        let x = SparseVector::from_points(1, &[(&[7], 1.0)]).unwrap();
        assert_eq!(family_norm(&x, &xp(0.3)).unwrap().value, 1.0);
    }

    #[test]
    fn block_matches_expanded_points_bitwise() {
        let f = Family::explicit(
            3.0,
            2,
            vec![
                PairPW::new(P::Discrete, W::One),
                PairPW::new(P::coordinate_grouping(vec![0]), W::lift(0, W::PowerDecay(0.5))),
                PairPW::new(P::Indiscrete, W::Constant(0.25)),
            ],
        )
        .unwrap();
        let block = ConstantBlock::new(Index::new(vec![2, 1]).unwrap(), 1, 1, 1000, 0.5).unwrap();
        let x = SparseVector::new(2, vec![(Index::new(vec![1, 1]).unwrap(), 2.0)], vec![block]).unwrap();
        let a = family_norm(&x, &f).unwrap();
        let b = family_norm(&x.expanded(), &f).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.argmax_member, b.argmax_member);
    }

    #[test]
    fn huge_block_stays_compressed() {
        let f = Family::explicit(
            4.0,
            2,
            vec![PairPW::new(P::Discrete, W::One), PairPW::new(P::coordinate_grouping(vec![0]), W::One)],
        )
        .unwrap();
        let block = ConstantBlock::new(Index::new(vec![1, 1]).unwrap(), 1, 1, 1 << 40, 1.0).unwrap();
        let x = SparseVector::new(2, vec![], vec![block]).unwrap();
        let r = family_norm(&x, &f).unwrap();
        // one cell holding 2^40 unit coefficients: (2^40)^{1/2}
        assert_eq!(r.value, (2f64).powi(20));
    }

    #[test]
    fn lp_norm_of_block() {
        let block = ConstantBlock::new(Index::new(vec![1]).unwrap(), 0, 1, 16, 1.0).unwrap();
        let x = SparseVector::new(1, vec![], vec![block]).unwrap();
        assert_eq!(lp_norm(&x, 4.0), 2.0);
    }

    fn arb_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![-10.0f64..10.0, Just(0.0)], 1..7)
    }

    fn vector(v: &[f64]) -> Option<SparseVector> {
        let x = SparseVector::from_sequence(v).unwrap();
        (!x.is_empty()).then_some(x)
    }

    proptest! {
        #[test]
        fn homogeneity_and_triangle(a in arb_vec(), b in arb_vec(), s in -5.0f64..5.0, w in 0.01f64..1.0) {
            let f = xp(w);
            if let (Some(x), Some(y)) = (vector(&a), vector(&b)) {
                let nx = family_norm(&x, &f).unwrap().value;
                let ny = family_norm(&y, &f).unwrap().value;
                if let Some(sum) = x.add(&y).ok().filter(|v| !v.is_empty()) {
                    let nsum = family_norm(&sum, &f).unwrap().value;
                    prop_assert!(nsum <= (nx + ny) * (1.0 + 1e-9));
                }
                if s != 0.0 {
                    let ns = family_norm(&x.scaled(s).unwrap(), &f).unwrap().value;
                    prop_assert!((ns - s.abs() * nx).abs() <= 1e-9 * s.abs() * nx);
                }
            }
        }

        #[test]
        fn signs_do_not_matter(a in arb_vec(), flips in prop::collection::vec(any::<bool>(), 7), w in 0.01f64..1.0) {
            if let Some(x) = vector(&a) {
                let y = x.with_signs(|i| flips[(i.get(0) - 1) as usize]);
                let f = xp(w);
                prop_assert_eq!(family_norm(&x, &f).unwrap().value, family_norm(&y, &f).unwrap().value);
            }
        }

        #[test]
        fn admissible_dominates_lp(a in arb_vec(), w in 0.01f64..1.0) {
            if let Some(x) = vector(&a) {
                prop_assert!(family_norm(&x, &xp(w)).unwrap().value >= lp_norm(&x, 4.0));
            }
        }

        #[test]
        fn more_members_never_decrease(a in arb_vec(), w in 0.01f64..1.0, c in 0.01f64..1.0) {
            if let Some(x) = vector(&a) {
                let small = xp(w);
                let big = Family::explicit(4.0, 1, vec![
                    PairPW::new(P::Discrete, W::One),
                    PairPW::new(P::Indiscrete, W::Constant(w)),
                    PairPW::new(P::Indiscrete, W::Constant(c)),
                ]).unwrap();
                prop_assert!(family_norm(&x, &big).unwrap().value >= family_norm(&x, &small).unwrap().value);
            }
        }

        #[test]
        fn elementary_tensors_multiply(a in arb_vec(), b in arb_vec(), w in 0.01f64..1.0, v in 0.01f64..1.0) {
            if let (Some(x), Some(y)) = (vector(&a), vector(&b)) {
                let t = Family::tensor(xp(w), xp(v)).unwrap();
                let lhs = family_norm(&x.tensor(&y).unwrap(), &t).unwrap().value;
                let rhs = family_norm(&x, &xp(w)).unwrap().value * family_norm(&y, &xp(v)).unwrap().value;
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
            }
        }
    }
}
