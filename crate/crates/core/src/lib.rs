//! Norms given by families of partitions and weights.

pub mod envelope;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod family;
pub mod index;
pub mod norm;
pub mod partition;
pub mod restrict;
pub mod spaces;
pub mod weight;

pub use error::{Error, Result};
pub use exact::{exact_sum, ExactSum};
pub use family::{Family, FamilyNode, PairPW};
pub use index::{Atom, ConstantBlock, Index, SparseVector, Support};
pub use norm::{family_norm, family_norm_with, lp_norm, pair_norm, NormResult};
pub use partition::PartitionDescriptor;
pub use restrict::{restrict_family, restrict_pair, Cell, RestrictOptions, RestrictedFamily, RestrictedPair};
pub use weight::{symbolic_tail_queries, TailQueries, WeightDescriptor};
