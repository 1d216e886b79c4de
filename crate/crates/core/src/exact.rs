//! Correctly rounded floating-point summation.
//!
//! Every norm in this crate is a sum of powers of sums. Accumulating those
//! sums with [`ExactSum`] makes the result independent of summation order,
//! so parallel splits, member orderings, and compressed versus expanded
//! vectors all produce the same bits.

/// Shewchuk-style accumulator holding non-overlapping partials.
///
/// `value()` returns the exact sum of everything added, rounded once.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds the exact product `a * b` (error-free via fused multiply-add).
    pub fn add_product(&mut self, a: f64, b: f64) {
        let hi = a * b;
        let lo = a.mul_add(b, -hi);
        self.add(hi);
        if lo != 0.0 {
            self.add(lo);
        }
    }

    /// Adds `count` copies of `x` exactly.
    pub fn add_repeated(&mut self, x: f64, count: u64) {
        if count == 1 {
            self.add(x);
            return;
        }
        // counts above 2^53 are split so each factor is an exact double
        let mut remaining = count;
        const CHUNK: u64 = 1 << 52;
        while remaining > 0 {
            let c = remaining.min(CHUNK);
            self.add_product(c as f64, x);
            remaining -= c;
        }
    }

    pub fn value(&self) -> f64 {
        // partials are non-overlapping and increasing in magnitude
        let mut n = self.partials.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = self.partials[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = self.partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: round-half-even needs a look at the next partial
        if n > 0 && ((lo < 0.0 && self.partials[n - 1] < 0.0) || (lo > 0.0 && self.partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        s.extend(iter);
        s
    }
}

/// Exact sum of a slice, rounded once.
pub fn exact_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancellation_is_exact() {
        let s = exact_sum(&[1e100, 1.0, -1e100, 1e-100]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn repeated_matches_expanded() {
        let x = 0.1f64;
        let mut a = ExactSum::new();
        a.add_repeated(x, 49);
        a.add(0.3);
        let mut b = ExactSum::new();
        for _ in 0..49 {
            b.add(x);
        }
        b.add(0.3);
        assert_eq!(a.value(), b.value());
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(-1e6f64..1e6, 0..40), seed in 0u64..1000) {
            let a = exact_sum(&xs);
            // deterministic shuffle
            let n = xs.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let j = (s >> 33) as usize % (i + 1);
                    xs.swap(i, j);
                }
            }
            prop_assert_eq!(a, exact_sum(&xs));
        }
    }
}
