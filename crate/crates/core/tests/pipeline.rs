use pwnorm::envelope::{envelope_norm_exact, xp_envelope_subset};
use pwnorm::experiments::{yn_report, YnParams};
use pwnorm::spaces::{make_lp, make_rosenthal_xp};
use pwnorm::{family_norm, lp_norm, ConstantBlock, Index, SparseVector, WeightDescriptor as W};

fn ones(n: u64) -> SparseVector {
    let entries = (1..=n).map(|i| (Index::new(vec![i]).unwrap(), 1.0)).collect();
    SparseVector::new(1, entries, vec![]).unwrap()
}

#[test]
fn lp_family_matches_lp_norm() {
    let f = make_lp(4.0).unwrap();
    let x = ones(5);
    let n = family_norm(&x, &f).unwrap();
    assert_eq!(n.value, lp_norm(&x, 4.0));
    assert!((n.value - 5f64.powf(0.25)).abs() < 1e-15);
}

#[test]
fn xp_envelope_agrees_with_subset_formula() {
    let f = make_rosenthal_xp(4.0, W::Constant(0.5)).unwrap();
    let x = ones(3);
    let env = envelope_norm_exact(&x, &f).unwrap();
    let sub = xp_envelope_subset(&[1.0; 3], &[0.5; 3], 4.0).unwrap();
    assert!((env.norm.value - sub.value).abs() <= 1e-14 * sub.value);
    assert!(env.norm.value >= family_norm(&x, &f).unwrap().value);
}

#[test]
fn compressed_block_equals_expanded() {
    let f = make_rosenthal_xp(4.0, W::PowerDecay(0.25)).unwrap();
    let block = ConstantBlock::new(Index::new(vec![1]).unwrap(), 0, 1, 40, 0.3).unwrap();
    let compressed = SparseVector::new(1, vec![], vec![block]).unwrap();
    let entries = (1..=40).map(|i| (Index::new(vec![i]).unwrap(), 0.3)).collect();
    let expanded = SparseVector::new(1, entries, vec![]).unwrap();
    assert_eq!(
        family_norm(&compressed, &f).unwrap().value.to_bits(),
        family_norm(&expanded, &f).unwrap().value.to_bits()
    );
}

#[test]
fn golden_yn_report() {
    let r = yn_report(&YnParams::golden(3).unwrap()).unwrap();
    assert!((r.envelope_lb - 3f64.powf(0.25)).abs() < 1e-12);
    assert!(r.ratio > 1.3 && r.ratio < 1.31);
}
