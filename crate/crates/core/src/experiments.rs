//! The Y_n distortion experiment and the Monte Carlo check of the
//! alternate Rosenthal inequality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envelope::{envelope_lower_bound, xp_envelope_subset};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::family::{check_p, lattice_subsets, Family};
use crate::index::{ConstantBlock, Index, SparseVector};
use crate::norm::family_norm;
use crate::restrict::{lattice_label, lattice_weight, restrict_family, RestrictOptions};
use crate::spaces::make_yn;
use crate::weight::WeightDescriptor;

/// Parameters of the Y_n witness: first coordinates m_l and block sizes K_l.
#[derive(Debug, Clone, PartialEq)]
pub struct YnParams {
    p: f64,
    n: usize,
    w: WeightDescriptor,
    eps: f64,
    m: Vec<u64>,
    k: Vec<u64>,
}

impl YnParams {
    /// Checks w(m_l) < (ε/n)^{1/2} and w(m_l)·K_l^{1/2-1/p} > (n/ε)^{1/p}.
    pub fn new(p: f64, n: usize, w: WeightDescriptor, eps: f64, m: Vec<u64>, k: Vec<u64>) -> Result<Self> {
        check_p(p)?;
        w.validate_for_arity(1)?;
        if n == 0 || n > 20 {
            return Err(Error::InvalidParams(format!("n = {n} outside 1..=20")));
        }
        if !(eps > 0.0 && eps <= n as f64) {
            return Err(Error::InvalidParams(format!("eps = {eps} outside (0, {n}]")));
        }
        if m.len() != n || k.len() != n {
            return Err(Error::InvalidParams(format!("need {n} values of m and K")));
        }
        let nf = n as f64;
        for l in 0..n {
            if m[l] == 0 || k[l] == 0 {
                return Err(Error::InvalidParams("m and K must be positive".into()));
            }
            let wm = w.eval_seq(m[l]);
            if !(wm < (eps / nf).sqrt()) {
                return Err(Error::InvalidParams(format!(
                    "w(m_{}) = {wm} is not below (eps/n)^(1/2) = {}",
                    l + 1,
                    (eps / nf).sqrt()
                )));
            }
            let lhs = wm * (k[l] as f64).powf(0.5 - 1.0 / p);
            if !(lhs > (nf / eps).powf(1.0 / p)) {
                return Err(Error::InvalidParams(format!(
                    "w(m_{0})·K_{0}^(1/2-1/p) = {lhs} is not above (n/eps)^(1/p) = {1}",
                    l + 1,
                    (nf / eps).powf(1.0 / p)
                )));
            }
        }
        Ok(YnParams { p, n, w, eps, m, k })
    }

    /// Smallest power of two m with w(m) < (ε/n)^{1/2}, then the smallest K
    /// satisfying the block-size condition; the same for every block.
    pub fn auto(p: f64, n: usize, w: WeightDescriptor, eps: f64) -> Result<Self> {
        check_p(p)?;
        if n == 0 || !(eps > 0.0 && eps <= n as f64) {
            return Err(Error::InvalidParams(format!("n = {n}, eps = {eps} out of range")));
        }
        let nf = n as f64;
        let target = (eps / nf).sqrt();
        let m = (0..63)
            .map(|e| 1u64 << e)
            .find(|&m| w.eval_seq(m) < target)
            .ok_or_else(|| Error::InvalidParams("weights never fall below (eps/n)^(1/2)".into()))?;
        let wm = w.eval_seq(m);
        let bound = (nf / eps).powf(1.0 / p);
        let ok = |k: u64| wm * (k as f64).powf(0.5 - 1.0 / p) > bound;
        let guess = ((bound / wm).powf(1.0 / (0.5 - 1.0 / p))).floor();
        if !guess.is_finite() || guess > 1e15 {
            return Err(Error::Capacity { what: "witness block size", needed: u128::MAX, limit: 1_000_000_000_000_000 });
        }
        let mut k = (guess as u64).max(2) - 1;
        while k > 1 && ok(k - 1) {
            k -= 1;
        }
        while !ok(k) {
            k += 1;
        }
        YnParams::new(p, n, w, eps, vec![m; n], vec![k; n])
    }

    /// The default experiment: p = 4, w_s = s^{-1/4}, m = 16, K = 49, ε = 1.
    pub fn golden(n: usize) -> Result<Self> {
        YnParams::new(4.0, n, WeightDescriptor::PowerDecay(0.25), 1.0, vec![16; n], vec![49; n])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> &WeightDescriptor {
        &self.w
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn m(&self) -> &[u64] {
        &self.m
    }

    pub fn k(&self) -> &[u64] {
        &self.k
    }

    pub fn family(&self) -> Result<Family> {
        make_yn(self.p, self.n, self.w.clone())
    }

    fn coefficient(&self, l: usize) -> f64 {
        1.0 / (self.w.eval_seq(self.m[l]) * (self.k[l] as f64).sqrt())
    }

    /// Template of block l (0-based) with the running coordinate at its
    /// first value.
    fn template(&self, l: usize) -> Vec<u64> {
        let mut c = Vec::with_capacity(2 * self.n);
        for k in 0..self.n {
            let second = if k < l {
                self.k[k] + l as u64
            } else {
                l as u64 + 1
            };
            c.push(self.m[k]);
            c.push(second);
        }
        c
    }
}

/// n constant blocks; block l runs over the second coordinate of pair l.
pub fn yn_witness(params: &YnParams) -> Result<SparseVector> {
    let blocks = (0..params.n)
        .map(|l| {
            ConstantBlock::new(
                Index::new(params.template(l))?,
                2 * l + 1,
                l as u64 + 1,
                l as u64 + params.k[l],
                params.coefficient(l),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SparseVector::new(2 * params.n, Vec::new(), blocks)
}

/// S_I for every lattice member, in member order, from the block structure:
/// a block whose running pair is in I splits into K singletons, otherwise
/// it is one cell; distinct blocks never share a cell unless I = ∅.
pub fn yn_sums(params: &YnParams) -> Result<Vec<f64>> {
    let p = params.p;
    let half = p / 2.0;
    let n = params.n;
    let templates: Vec<Vec<u64>> = (0..n).map(|l| params.template(l)).collect();
    let mut out = Vec::with_capacity(1 << n);
    for subset in lattice_subsets(n) {
        let mut outer = ExactSum::new();
        let mut shared = ExactSum::new();
        for l in 0..n {
            let w = lattice_weight(&params.w, n, &subset, &templates[l]);
            let t = params.coefficient(l) * w;
            if subset.is_empty() {
                shared.add_repeated(t * t, params.k[l]);
            } else if subset.contains(&l) {
                outer.add_repeated((t * t).powf(half), params.k[l]);
            } else {
                let mut cell = ExactSum::new();
                cell.add_repeated(t * t, params.k[l]);
                outer.add(cell.value().powf(half));
            }
        }
        if subset.is_empty() {
            outer.add(shared.value().powf(half));
        }
        out.push(outer.value().powf(1.0 / p));
    }
    Ok(out)
}

/// The bound each S_I obeys for valid parameters with n ≥ 2, by member
/// order: |I| = n-1 gives (ε+1)^{1/p}, I = ∅ gives ε^{1/2}, others ε^{1/p}.
pub fn yn_bounds(params: &YnParams) -> Vec<f64> {
    let (p, n, eps) = (params.p, params.n, params.eps);
    lattice_subsets(n)
        .iter()
        .map(|s| {
            if s.len() + 1 == n {
                (eps + 1.0).powf(1.0 / p)
            } else if s.is_empty() {
                eps.sqrt()
            } else {
                eps.powf(1.0 / p)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct YnReport {
    pub sums: Vec<f64>,
    pub labels: Vec<String>,
    pub given_norm: f64,
    pub envelope_lb: f64,
    pub ratio: f64,
    pub distance_lb: f64,
    /// Member label chosen for each block.
    pub assignment: Vec<String>,
}

/// Member label matched to block l: I = {1..n} \ {l}.
pub fn matched_member(n: usize, l: usize) -> String {
    let rest: Vec<usize> = (0..n).filter(|&k| k != l).collect();
    lattice_label(&rest)
}

pub fn yn_report(params: &YnParams) -> Result<YnReport> {
    let sums = yn_sums(params)?;
    let labels = lattice_subsets(params.n).iter().map(|s| lattice_label(s)).collect();
    let given_norm = sums.iter().cloned().fold(0.0, f64::max);
    let x = yn_witness(params)?;
    let family = params.family()?;
    let (support, _) = x.to_atoms()?;
    let rf = restrict_family(&family, &support, &RestrictOptions::default())?;
    let assignment: Vec<String> = (0..params.n).map(|l| matched_member(params.n, l)).collect();
    if rf.support.len() != params.n {
        return Err(Error::SupportMismatch("witness blocks did not stay compressed".into()));
    }
    // atoms are sorted by template; map each back to its block
    let sigma = rf
        .support
        .atoms()
        .iter()
        .map(|atom| {
            let l = (0..params.n)
                .find(|&l| atom.template().coords() == params.template(l).as_slice())
                .expect("atom is a witness block");
            rf.find_label(&assignment[l])
                .ok_or_else(|| Error::InvalidParams(format!("member {} not restricted", assignment[l])))
        })
        .collect::<Result<Vec<_>>>()?;
    let envelope_lb = envelope_lower_bound(&x, &rf, &sigma, params.p)?;
    let ratio = envelope_lb / given_norm;
    Ok(YnReport { sums, labels, given_norm, envelope_lb, ratio, distance_lb: ratio.sqrt(), assignment })
}

/// Generic evaluation of the witness norm, for comparison with the sums.
pub fn yn_given_norm_generic(params: &YnParams) -> Result<f64> {
    Ok(family_norm(&yn_witness(params)?, &params.family()?)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePoint {
    /// ±a with probability q/2 each, 0 otherwise
    pub a: f64,
    pub q: f64,
}

impl ThreePoint {
    pub fn rademacher() -> Self {
        ThreePoint { a: 1.0, q: 1.0 }
    }

    /// ‖f‖_p^p = |a|^p q.
    pub fn moment(&self, p: f64) -> f64 {
        self.a.abs().powf(p) * self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RosenthalResult {
    pub lhs_est: f64,
    pub stderr: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Estimate of E|Σ f_n|^p.
    pub moment_est: f64,
    /// Subset Q attaining the right side (0-based, ℓ_p part).
    pub subset: Vec<usize>,
}

pub const MC_CHUNK: u64 = 1 << 16;
pub const MIN_SAMPLES: u64 = 10_000;
pub const MAX_VARIABLES: usize = 20;

/// max_Q (Σ_{n∈Q}‖f_n‖_p^p + (Σ_{n∉Q}‖f_n‖_2²)^{p/2})^{1/p}, via the X_p
/// subset max with a'_n = a_n q_n^{1/p} and w_n = q_n^{1/2-1/p}.
pub fn rosenthal_rhs(vars: &[ThreePoint], p: f64) -> Result<(f64, Vec<usize>)> {
    let a: Vec<f64> = vars.iter().map(|v| v.a * v.q.powf(1.0 / p)).collect();
    let w: Vec<f64> = vars.iter().map(|v| v.q.powf(0.5 - 1.0 / p)).collect();
    let r = xp_envelope_subset(&a, &w, p)?;
    Ok((r.value, r.subset))
}

/// Monte Carlo estimate of (E|Σ f_n|^p)^{1/p} for independent symmetric
/// three-point variables, against the exact subset max.
pub fn rosenthal_mc(vars: &[ThreePoint], p: f64, samples: u64, seed: u64) -> Result<RosenthalResult> {
    check_p(p)?;
    if vars.is_empty() || vars.len() > MAX_VARIABLES {
        return Err(Error::InvalidParams(format!("need 1..={MAX_VARIABLES} variables, got {}", vars.len())));
    }
    for v in vars {
        if !v.a.is_finite() || !(v.q > 0.0 && v.q <= 1.0) {
            return Err(Error::InvalidParams(format!("variable (a = {}, q = {}) out of range", v.a, v.q)));
        }
    }
    if vars.iter().all(|v| v.a == 0.0) {
        return Err(Error::InvalidParams("all amplitudes are zero".into()));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParams(format!("at least {MIN_SAMPLES} samples required")));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(ExactSum, ExactSum)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut s1 = ExactSum::new();
            let mut s2 = ExactSum::new();
            for _ in 0..count {
                let mut total = 0.0;
                for v in vars {
                    let u: f64 = rng.gen();
                    if u < v.q / 2.0 {
                        total += v.a;
                    } else if u < v.q {
                        total -= v.a;
                    }
                }
                let m = total.abs().powf(p);
                s1.add(m);
                s2.add(m * m);
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = ExactSum::new();
    let mut s2 = ExactSum::new();
    for (a, b) in &partials {
        s1.add(a.value());
        s2.add(b.value());
    }
    let n = samples as f64;
    let mean = s1.value() / n;
    let var = (s2.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
    let se_mean = (var / n).sqrt();
    let lhs_est = mean.powf(1.0 / p);
    // delta method for g(m) = m^{1/p}
    let stderr = if mean > 0.0 { lhs_est / (p * mean) * se_mean } else { 0.0 };
    let (rhs, subset) = rosenthal_rhs(vars, p)?;
    Ok(RosenthalResult { lhs_est, stderr, rhs, ratio: lhs_est / rhs, moment_est: mean, subset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn golden_parameters_are_what_auto_picks() {
        let auto = YnParams::auto(4.0, 3, WeightDescriptor::PowerDecay(0.25), 1.0).unwrap();
        assert_eq!(auto, YnParams::golden(3).unwrap());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let w = WeightDescriptor::PowerDecay(0.25);
        assert!(YnParams::new(4.0, 3, w.clone(), 1.0, vec![8; 3], vec![49; 3]).is_err());
        assert!(YnParams::new(4.0, 3, w.clone(), 1.0, vec![16; 3], vec![48; 3]).is_err());
        assert!(YnParams::new(4.0, 3, w.clone(), 3.5, vec![16; 3], vec![49; 3]).is_err());
        assert!(YnParams::new(4.0, 3, w, 1.0, vec![16; 2], vec![49; 3]).is_err());
    }

    #[test]
    fn witness_matches_block_list() {
        let params = YnParams::golden(3).unwrap();
        let x = yn_witness(&params).unwrap();
        let b = x.blocks();
        assert_eq!(b.len(), 3);
        assert_eq!(b[0].template.coords(), &[16, 1, 16, 1, 16, 1]);
        assert_eq!((b[0].running, b[0].lo, b[0].hi), (1, 1, 49));
        assert_eq!(b[1].template.coords(), &[16, 50, 16, 2, 16, 2]);
        assert_eq!((b[1].running, b[1].lo, b[1].hi), (3, 2, 50));
        assert_eq!(b[2].template.coords(), &[16, 51, 16, 51, 16, 3]);
        assert_eq!((b[2].running, b[2].lo, b[2].hi), (5, 3, 51));
        for blk in b {
            assert_eq!(blk.coefficient, 1.0 / (0.5 * 7.0));
            // unit ℓ_2 mass under the matched weight
            assert!(rel(blk.len() as f64 * (blk.coefficient * 0.5).powi(2), 1.0) < 1e-15);
        }
    }

    #[test]
    fn golden_sums() {
        let s = yn_sums(&YnParams::golden(3).unwrap()).unwrap();
        let c = 0.5 * 49f64.powf(0.25);
        assert!(rel(s[0], (3.0f64 / 16.0).sqrt()) < 1e-12);
        let s4 = (2.0 * c.powi(-4) / 16.0 + 1.0).powf(0.25);
        for i in 4..7 {
            assert!(rel(s[i], s4) < 1e-12, "S_{i} = {}", s[i]);
        }
        assert!(rel(s[7], (3.0 * c.powi(-4)).powf(0.25)) < 1e-12);
        assert!((s[4] - 1.01005).abs() < 1e-5);
        assert!((s[7] - 0.994858).abs() < 1e-6);
    }

    #[test]
    fn golden_report() {
        let r = yn_report(&YnParams::golden(3).unwrap()).unwrap();
        assert!(rel(r.envelope_lb, 3f64.powf(0.25)) < 1e-12);
        assert!((r.ratio - 1.30298).abs() < 1e-5);
        assert!((r.distance_lb - 1.14148).abs() < 1e-5);
        assert_eq!(r.assignment, vec!["I={2,3}", "I={1,3}", "I={1,2}"]);
        assert_eq!(r.labels[4], "I={1,2}");
    }

    #[test]
    fn sums_agree_with_generic_norm() {
        for n in 2..=4 {
            let params = YnParams::auto(4.0, n, WeightDescriptor::PowerDecay(0.25), 1.0).unwrap();
            let max = yn_sums(&params).unwrap().into_iter().fold(0.0, f64::max);
            assert_eq!(max, yn_given_norm_generic(&params).unwrap());
        }
    }

    #[test]
    fn ratio_grows_as_eps_shrinks() {
        let mut last_norm = f64::INFINITY;
        let mut last_ratio = 0.0;
        for eps in [1.0, 0.5, 0.1] {
            let params = YnParams::auto(4.0, 3, WeightDescriptor::PowerDecay(0.25), eps).unwrap();
            let r = yn_report(&params).unwrap();
            assert!(r.given_norm < last_norm && r.ratio > last_ratio);
            last_norm = r.given_norm;
            last_ratio = r.ratio;
        }
        assert!(last_norm < 1.0 + 0.1f64.powf(0.25));
    }

    #[test]
    fn rademacher_rhs_is_sqrt_ten() {
        let vars = vec![ThreePoint::rademacher(); 10];
        let (rhs, subset) = rosenthal_rhs(&vars, 4.0).unwrap();
        assert_eq!(rhs, 10f64.sqrt());
        assert!(subset.is_empty());
    }

    #[test]
    fn single_variable_collapses() {
        let v = ThreePoint { a: 2.0, q: 0.3 };
        let r = rosenthal_mc(&[v], 4.0, 200_000, 7).unwrap();
        let exact = v.moment(4.0).powf(0.25);
        assert_eq!(r.rhs, exact);
        assert!((r.lhs_est - exact).abs() < 3.0 * r.stderr + 1e-12);
    }

    #[test]
    fn seeded_runs_repeat() {
        let vars = vec![ThreePoint { a: 1.5, q: 0.4 }, ThreePoint { a: -0.5, q: 1.0 }];
        let a = rosenthal_mc(&vars, 3.0, 100_000, 11).unwrap();
        let b = rosenthal_mc(&vars, 3.0, 100_000, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.lhs_est, rosenthal_mc(&vars, 3.0, 100_000, 12).unwrap().lhs_est);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(rosenthal_mc(&[ThreePoint { a: 0.0, q: 0.5 }], 4.0, 10_000, 1).is_err());
        assert!(rosenthal_mc(&[ThreePoint::rademacher()], 4.0, 100, 1).is_err());
        assert!(rosenthal_mc(&vec![ThreePoint::rademacher(); 21], 4.0, 10_000, 1).is_err());
        assert!(rosenthal_mc(&[ThreePoint { a: 1.0, q: 0.0 }], 4.0, 10_000, 1).is_err());
    }

    fn arb_params() -> impl Strategy<Value = YnParams> {
        (2usize..=4, 0.05f64..=1.0, 0u32..3, 0u64..40, prop_oneof![Just(3.0), Just(4.0), Just(6.0)]).prop_map(
            |(n, eps, m_shift, k_extra, p)| {
                let w = WeightDescriptor::PowerDecay(0.25);
                let base = YnParams::auto(p, n, w.clone(), eps).unwrap();
                let m: Vec<u64> = base.m().iter().map(|m| m << m_shift).collect();
                let auto_k = YnParams::auto(p, n, w.clone(), eps).unwrap();
                // larger m lowers w(m), so rescale K to stay valid
                let scale = 2f64.powf(m_shift as f64 * 0.25 / (0.5 - 1.0 / p)).ceil() as u64;
                let k: Vec<u64> = auto_k.k().iter().map(|k| k * scale + k_extra).collect();
                YnParams::new(p, n, w, eps, m, k).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn paper_bounds_hold(params in arb_params()) {
            let sums = yn_sums(&params).unwrap();
            for (i, (s, b)) in sums.iter().zip(yn_bounds(&params)).enumerate() {
                prop_assert!(*s < b, "S_{} = {} not below {}", i, s, b);
            }
            let r = yn_report(&params).unwrap();
            prop_assert!(rel(r.envelope_lb, (params.n() as f64).powf(1.0 / params.p())) < 1e-12);
        }
    }
}
