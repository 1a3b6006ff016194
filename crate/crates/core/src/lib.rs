pub mod checkers;
pub mod cli;
pub mod explicit;
pub mod model;
pub mod prism;
pub mod property;
pub mod solvers;
pub mod scalar;

pub use fixedbitset::FixedBitSet as BitSet;

/// Builds a bitset of length `len` with the given members.
pub fn bitset_from(len: usize, members: impl IntoIterator<Item = usize>) -> BitSet {
    let mut bits = BitSet::with_capacity(len);
    for m in members {
        bits.insert(m);
    }
    bits
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/prism.md")]
    mod prism {}
    #[doc = include_str!("../../../book/src/properties.md")]
    mod properties {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/rewards.md")]
    mod rewards {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
