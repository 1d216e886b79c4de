//! Weight functions B → (0,1], described intensionally.

use std::fmt;

use crate::error::{Error, Result};
use crate::index::Index;

/// Intensional weight function on ℕ^m with values in (0,1].
///
/// Sequence variants (`PowerDecay`, `Geometric`, `Explicit`, `Interleave`)
/// read the first coordinate of the index; `CoordinateLift` reads another.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightDescriptor {
    One,
    Constant(f64),
    /// w_s = min(1, s^-α)
    PowerDecay(f64),
    /// w_s = r^s
    Geometric(f64),
    /// head values for s = 1..=head.len(), then `tail` evaluated at s
    Explicit { head: Vec<f64>, tail: Box<WeightDescriptor> },
    /// w_{2s} = even(s), w_{2s-1} = odd(s)
    Interleave { even: Box<WeightDescriptor>, odd: Box<WeightDescriptor> },
    /// W(b) = inner(b[position]), position 0-based
    CoordinateLift { position: usize, inner: Box<WeightDescriptor> },
    Product(Vec<WeightDescriptor>),
    /// Pointwise minimum.
    Min(Vec<WeightDescriptor>),
}

impl WeightDescriptor {
    pub fn constant(c: f64) -> Result<Self> {
        let w = WeightDescriptor::Constant(c);
        w.validate()?;
        Ok(w)
    }

    pub fn power_decay(alpha: f64) -> Result<Self> {
        let w = WeightDescriptor::PowerDecay(alpha);
        w.validate()?;
        Ok(w)
    }

    pub fn geometric(r: f64) -> Result<Self> {
        let w = WeightDescriptor::Geometric(r);
        w.validate()?;
        Ok(w)
    }

    pub fn explicit(head: Vec<f64>, tail: WeightDescriptor) -> Result<Self> {
        let w = WeightDescriptor::Explicit { head, tail: Box::new(tail) };
        w.validate()?;
        Ok(w)
    }

    pub fn interleave(even: WeightDescriptor, odd: WeightDescriptor) -> Self {
        WeightDescriptor::Interleave { even: Box::new(even), odd: Box::new(odd) }
    }

    pub fn lift(position: usize, inner: WeightDescriptor) -> Self {
        WeightDescriptor::CoordinateLift { position, inner: Box::new(inner) }
    }

    /// Checks every parameter range recursively.
    pub fn validate(&self) -> Result<()> {
        use WeightDescriptor::*;
        match self {
            One => Ok(()),
            Constant(c) => check_unit(*c, "constant"),
            PowerDecay(a) => {
                if a.is_finite() && *a > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidWeight(format!("power_decay exponent must be > 0, got {a}")))
                }
            }
            Geometric(r) => {
                if r.is_finite() && *r > 0.0 && *r < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidWeight(format!("geometric ratio must lie in (0,1), got {r}")))
                }
            }
            Explicit { head, tail } => {
                for h in head {
                    check_unit(*h, "explicit head")?;
                }
                if matches!(**tail, Explicit { .. }) {
                    return Err(Error::InvalidWeight("explicit tail must not itself be explicit".into()));
                }
                tail.validate()
            }
            Interleave { even, odd } => {
                even.validate()?;
                odd.validate()
            }
            CoordinateLift { inner, .. } => inner.validate(),
            Product(fs) | Min(fs) => {
                if fs.is_empty() {
                    return Err(Error::InvalidWeight("product/min needs at least one factor".into()));
                }
                fs.iter().try_for_each(|f| f.validate())
            }
        }
    }

    /// Checks that every coordinate the descriptor reads exists.
    pub fn validate_for_arity(&self, arity: usize) -> Result<()> {
        self.validate()?;
        let needed = self.max_position() + 1;
        if needed > arity {
            return Err(Error::ArityMismatch { expected: arity, found: needed });
        }
        Ok(())
    }

    fn max_position(&self) -> usize {
        use WeightDescriptor::*;
        match self {
            One | Constant(_) | PowerDecay(_) | Geometric(_) | Explicit { .. } | Interleave { .. } => 0,
            CoordinateLift { position, .. } => *position,
            Product(fs) | Min(fs) => fs.iter().map(|f| f.max_position()).max().unwrap_or(0),
        }
    }

    /// Value at an index; always in (0,1] for a validated descriptor.
    pub fn eval(&self, index: &Index) -> f64 {
        self.eval_coords(index.coords())
    }

    /// Value of a one-dimensional descriptor at position s ≥ 1.
    pub fn eval_seq(&self, s: u64) -> f64 {
        self.eval_coords(&[s])
    }

    fn eval_coords(&self, c: &[u64]) -> f64 {
        use WeightDescriptor::*;
        let v = match self {
            One => 1.0,
            Constant(x) => *x,
            PowerDecay(a) => (c[0] as f64).powf(-a).min(1.0),
            Geometric(r) => r.powf(c[0] as f64),
            Explicit { head, tail } => {
                let s = c[0] as usize;
                if s <= head.len() {
                    head[s - 1]
                } else {
                    tail.eval_coords(c)
                }
            }
            Interleave { even, odd } => {
                let s = c[0];
                if s % 2 == 0 {
                    even.eval_coords(&[s / 2])
                } else {
                    odd.eval_coords(&[s.div_ceil(2)])
                }
            }
            CoordinateLift { position, inner } => inner.eval_coords(&[c[*position]]),
            Product(fs) => fs.iter().fold(1.0, |acc, f| acc * f.eval_coords(c)),
            Min(fs) => fs.iter().map(|f| f.eval_coords(c)).fold(1.0, f64::min),
        };
        // underflow of r^s or long products must not leave (0,1]
        v.max(f64::MIN_POSITIVE)
    }

    /// True when the value never changes as coordinate `pos` varies.
    pub fn constant_along(&self, pos: usize) -> bool {
        use WeightDescriptor::*;
        match self {
            One | Constant(_) => true,
            PowerDecay(_) | Geometric(_) | Explicit { .. } | Interleave { .. } => pos != 0,
            CoordinateLift { position, inner } => pos != *position || inner.constant_along(0),
            Product(fs) | Min(fs) => fs.iter().all(|f| f.constant_along(pos)),
        }
    }

    /// Syntactically the constant 1.
    pub fn is_identically_one(&self) -> bool {
        use WeightDescriptor::*;
        match self {
            One => true,
            Constant(c) => *c == 1.0,
            CoordinateLift { inner, .. } => inner.is_identically_one(),
            Product(fs) | Min(fs) => fs.iter().all(|f| f.is_identically_one()),
            _ => false,
        }
    }

    /// Decay classes of a one-dimensional descriptor; each class describes
    /// an infinite subsequence.
    fn decay_classes(&self) -> Result<Vec<Decay>> {
        use WeightDescriptor::*;
        match self {
            One | Constant(_) => Ok(vec![Decay::Bounded]),
            PowerDecay(a) => Ok(vec![Decay::Power(*a)]),
            Geometric(_) => Ok(vec![Decay::Geometric]),
            Explicit { tail, .. } => tail.decay_classes(),
            Interleave { even, odd } => {
                let mut v = even.decay_classes()?;
                for d in odd.decay_classes()? {
                    if !v.contains(&d) {
                        v.push(d);
                    }
                }
                Ok(v)
            }
            CoordinateLift { .. } => Err(Error::Undecidable(
                "coordinate lift is not a one-dimensional weight sequence".into(),
            )),
            Product(fs) | Min(fs) => {
                let is_min = matches!(self, Min(_));
                let classes = fs.iter().map(|f| f.decay_classes()).collect::<Result<Vec<_>>>()?;
                if classes.iter().filter(|c| c.len() > 1).count() > 1 {
                    return Err(Error::Undecidable(
                        "product/min of several interleaved sequences".into(),
                    ));
                }
                let mut acc = vec![if is_min { Decay::Bounded } else { Decay::Power(0.0) }];
                for c in classes {
                    let mut next = Vec::new();
                    for a in &acc {
                        for b in &c {
                            let d = if is_min { a.min_with(*b) } else { a.times(*b) };
                            if !next.contains(&d) {
                                next.push(d);
                            }
                        }
                    }
                    acc = next;
                }
                Ok(acc.into_iter().map(Decay::normalized).collect())
            }
        }
    }
}

fn check_unit(c: f64, what: &str) -> Result<()> {
    if c.is_finite() && c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(format!("{what} value {c} outside (0,1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Decay {
    Bounded,
    Power(f64),
    Geometric,
}

impl Decay {
    fn normalized(self) -> Decay {
        match self {
            Decay::Power(a) if a == 0.0 => Decay::Bounded,
            d => d,
        }
    }

    fn exponent(self) -> Option<f64> {
        match self {
            Decay::Bounded => Some(0.0),
            Decay::Power(a) => Some(a),
            Decay::Geometric => None,
        }
    }

    fn times(self, other: Decay) -> Decay {
        match (self.exponent(), other.exponent()) {
            (Some(a), Some(b)) => Decay::Power(a + b),
            _ => Decay::Geometric,
        }
    }

    fn min_with(self, other: Decay) -> Decay {
        match (self.exponent(), other.exponent()) {
            (Some(a), Some(b)) => Decay::Power(a.max(b)),
            _ => Decay::Geometric,
        }
    }
}

/// Symbolic verdicts on the tail of a weight sequence for exponent p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailQueries {
    /// inf_n w_n > 0
    pub inf_positive: bool,
    /// Σ w_n^{2p/(p-2)} < ∞
    pub power_sum_finite: bool,
    /// for each ε > 0, Σ_{w_n<ε} w_n^{2p/(p-2)} = ∞
    pub star: bool,
    /// some ε splits the sequence into an infinite part bounded below and an
    /// infinite part with summable powers
    pub split: bool,
}

/// The Rosenthal exponent 2p/(p-2).
pub fn rosenthal_exponent(p: f64) -> f64 {
    2.0 * p / (p - 2.0)
}

/// Symbolic tail queries for a one-dimensional descriptor.
pub fn symbolic_tail_queries(w: &WeightDescriptor, p: f64) -> Result<TailQueries> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    w.validate()?;
    let e = rosenthal_exponent(p);
    let mut bounded = false;
    let mut summable = false;
    let mut divergent = false;
    for d in w.decay_classes()? {
        match d {
            Decay::Bounded => bounded = true,
            Decay::Geometric => summable = true,
            Decay::Power(a) => {
                if a * e > 1.0 {
                    summable = true
                } else {
                    divergent = true
                }
            }
        }
    }
    Ok(TailQueries {
        inf_positive: bounded && !summable && !divergent,
        power_sum_finite: summable && !bounded && !divergent,
        star: divergent,
        split: bounded && summable && !divergent,
    })
}

/// Σ_{s=1}^{n} w_s^{exponent}, the numeric evidence behind the symbolic
/// verdicts.
pub fn partial_power_sum(w: &WeightDescriptor, exponent: f64, n: u64) -> f64 {
    let mut acc = crate::exact::ExactSum::new();
    for s in 1..=n {
        acc.add(w.eval_seq(s).powf(exponent));
    }
    acc.value()
}

impl fmt::Display for WeightDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WeightDescriptor::*;
        match self {
            One => write!(f, "one"),
            Constant(c) => write!(f, "constant(c = {c:?})"),
            PowerDecay(a) => write!(f, "power_decay(alpha = {a:?})"),
            Geometric(r) => write!(f, "geometric(r = {r:?})"),
            Explicit { head, tail } => {
                write!(f, "explicit(head = [")?;
                for (i, h) in head.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{h:?}")?;
                }
                write!(f, "], tail = {tail})")
            }
            Interleave { even, odd } => write!(f, "interleave(even = {even}, odd = {odd})"),
            CoordinateLift { position, inner } => write!(f, "lift(pos = {}, inner = {inner})", position + 1),
            Product(fs) => write_list(f, "product", fs),
            Min(fs) => write_list(f, "min", fs),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, name: &str, fs: &[WeightDescriptor]) -> fmt::Result {
    write!(f, "{name}(factors = [")?;
    for (i, w) in fs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{w}")?;
    }
    write!(f, "])")
}
