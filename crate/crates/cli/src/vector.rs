//! Vector files.
//!
//! One entry per line. A point entry lists its coordinates, then `:` and
//! the coefficient:
//!
//! ```text
//! 1 2 : 0.5
//! block 3 1 2 1 100 : 0.1
//! ```
//!
//! A `block` line gives the template coordinates, the running coordinate
//! (1-based), and the inclusive range `lo hi` it sweeps. `#` starts a
//! comment.

use pwnorm::{ConstantBlock, Index, SparseVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct VectorError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, VectorError> {
    Err(VectorError { line, msg: msg.into() })
}

fn ints(line: usize, words: &[&str]) -> Result<Vec<u64>, VectorError> {
    words
        .iter()
        .map(|w| w.parse::<u64>().or_else(|_| err(line, format!("expected a positive integer, got '{w}'"))))
        .collect()
}

pub fn parse_vector(text: &str) -> Result<SparseVector, VectorError> {
    let mut arity: Option<usize> = None;
    let mut entries = Vec::new();
    let mut blocks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = content.split_once(':') else {
            return err(line, "missing ':' before the coefficient");
        };
        let value: f64 = match rhs.trim().parse() {
            Ok(v) => v,
            Err(_) => return err(line, format!("malformed coefficient '{}'", rhs.trim())),
        };
        if !value.is_finite() {
            return err(line, "coefficient must be finite");
        }
        let words: Vec<&str> = lhs.split_whitespace().collect();
        let (coords, block) = match words.first() {
            Some(&"block") => {
                if words.len() < 5 {
                    return err(line, "block needs a template, a running coordinate, lo and hi");
                }
                let nums = ints(line, &words[1..])?;
                let (template, tail) = nums.split_at(nums.len() - 3);
                (template.to_vec(), Some((tail[0], tail[1], tail[2])))
            }
            Some(_) => (ints(line, &words)?, None),
            None => return err(line, "missing coordinates"),
        };
        match arity {
            None => arity = Some(coords.len()),
            Some(a) if a != coords.len() => {
                return err(line, format!("expected {a} coordinates, found {}", coords.len()));
            }
            _ => {}
        }
        if value == 0.0 {
            continue;
        }
        let index = Index::new(coords).or_else(|e| err(line, e.to_string()))?;
        match block {
            None => entries.push((index, value)),
            Some((running, lo, hi)) => {
                if running == 0 {
                    return err(line, "running coordinate is 1-based");
                }
                let b = ConstantBlock::new(index, running as usize - 1, lo, hi, value).or_else(|e| err(line, e.to_string()))?;
                blocks.push(b);
            }
        }
    }
    let Some(arity) = arity else {
        return err(0, "no entries");
    };
    SparseVector::new(arity, entries, blocks).or_else(|e| err(0, e.to_string()))
}

/// Writes a vector in the file format; blocks stay compressed.
pub fn format_vector(x: &SparseVector) -> String {
    let mut out = String::new();
    for (idx, v) in x.entries() {
        let c: Vec<String> = idx.coords().iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("{} : {v:?}\n", c.join(" ")));
    }
    for b in x.blocks() {
        let c: Vec<String> = b.template.coords().iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("block {} {} {} {} : {:?}\n", c.join(" "), b.running + 1, b.lo, b.hi, b.coefficient));
    }
    out
}
