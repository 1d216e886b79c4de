//! Intensional partitions of ℕ^m given by cell keys.

use std::fmt;

use crate::error::{Error, Result};

/// A partition of ℕ^m described by which coordinates a cell fixes.
///
/// Two points share a cell iff they agree on every fixed coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PartitionDescriptor {
    /// Every point its own cell.
    Discrete,
    /// One cell.
    Indiscrete,
    /// Cells fix these coordinates (0-based positions).
    CoordinateGrouping(Vec<usize>),
    /// Pair-structured arity 2n: cells fix the coordinate pairs listed
    /// (0-based pair numbers), i.e. positions 2k and 2k+1.
    PairGrouping(Vec<usize>),
}

impl PartitionDescriptor {
    pub fn coordinate_grouping(mut positions: Vec<usize>) -> Self {
        positions.sort_unstable();
        positions.dedup();
        PartitionDescriptor::CoordinateGrouping(positions)
    }

    pub fn pair_grouping(mut pairs: Vec<usize>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        PartitionDescriptor::PairGrouping(pairs)
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        match self {
            PartitionDescriptor::Discrete | PartitionDescriptor::Indiscrete => Ok(()),
            PartitionDescriptor::CoordinateGrouping(f) => match f.iter().find(|&&k| k >= arity) {
                Some(k) => Err(Error::InvalidParams(format!("grouping coordinate {} outside arity {arity}", k + 1))),
                None => Ok(()),
            },
            PartitionDescriptor::PairGrouping(pairs) => {
                if arity % 2 != 0 {
                    return Err(Error::InvalidParams(format!("pair grouping needs even arity, got {arity}")));
                }
                match pairs.iter().find(|&&k| k >= arity / 2) {
                    Some(k) => Err(Error::InvalidParams(format!("pair {} outside {} pairs", k + 1, arity / 2))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Sorted coordinate positions fixed by every cell; the cell key of a
    /// point is its coordinates at these positions.
    pub fn fixed_positions(&self, arity: usize) -> Vec<usize> {
        match self {
            PartitionDescriptor::Discrete => (0..arity).collect(),
            PartitionDescriptor::Indiscrete => Vec::new(),
            PartitionDescriptor::CoordinateGrouping(f) => f.clone(),
            PartitionDescriptor::PairGrouping(pairs) => pairs.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect(),
        }
    }

    pub fn is_discrete(&self, arity: usize) -> bool {
        self.fixed_positions(arity).len() == arity
    }

    pub fn is_indiscrete(&self, arity: usize) -> bool {
        self.fixed_positions(arity).is_empty()
    }

    pub fn cell_key(&self, arity: usize, coords: &[u64]) -> Vec<u64> {
        self.fixed_positions(arity).iter().map(|&k| coords[k]).collect()
    }
}

impl fmt::Display for PartitionDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, xs: &[usize]| {
            let s: Vec<String> = xs.iter().map(|k| (k + 1).to_string()).collect();
            write!(f, "{{{}}}", s.join(","))
        };
        match self {
            PartitionDescriptor::Discrete => write!(f, "discrete"),
            PartitionDescriptor::Indiscrete => write!(f, "indiscrete"),
            PartitionDescriptor::CoordinateGrouping(c) => {
                write!(f, "fix")?;
                list(f, c)
            }
            PartitionDescriptor::PairGrouping(p) => {
                write!(f, "fix-pairs")?;
                list(f, p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_and_indiscrete_are_extreme_groupings() {
        assert_eq!(PartitionDescriptor::Discrete.fixed_positions(3), vec![0, 1, 2]);
        assert!(PartitionDescriptor::coordinate_grouping(vec![2, 0, 1]).is_discrete(3));
        assert!(PartitionDescriptor::coordinate_grouping(vec![]).is_indiscrete(3));
    }

    #[test]
    fn pair_grouping_fixes_both_coordinates_of_a_pair() {
        let p = PartitionDescriptor::pair_grouping(vec![0]);
        assert_eq!(p.fixed_positions(6), vec![0, 1]);
        assert_eq!(p.cell_key(6, &[1, 2, 2, 1, 3, 1]), vec![1, 2]);
        assert!(PartitionDescriptor::pair_grouping(vec![0, 1, 2]).is_discrete(6));
    }

    #[test]
    fn validation() {
        assert!(PartitionDescriptor::pair_grouping(vec![0]).validate(3).is_err());
        assert!(PartitionDescriptor::pair_grouping(vec![3]).validate(6).is_err());
        assert!(PartitionDescriptor::coordinate_grouping(vec![2]).validate(2).is_err());
    }
}
