//! Mid-term (monthly) electricity load forecasting.
//!
//! The pipeline decomposes a monthly load series into seasonal, trend and
//! random components, screens exogenous features per component, forecasts the
//! seasonal part with a seasonal-naive rule and the other two with a stacked
//! error-correction pair (recurrent network first stage, gradient-boosted
//! trees second stage), then recombines the component forecasts additively.
//!
//! Entry points:
//! - [`series`]: calendar-indexed series/feature types and CSV ingestion
//! - [`decompose`]: LOESS smoothing and seasonal-trend decomposition
//! - [`featsel`]: correlation screening and importance-based pruning
//! - [`lstm`]: from-scratch recurrent regressor with Adam training
//! - [`gbt`]: from-scratch gradient-boosted regression trees
//! - [`pipeline`]: the full forecaster and its ablation variants
//! - [`evalstat`]: forecast metrics and comparison statistics
//! - [`synth`]: deterministic synthetic dataset generator

pub mod decompose;
mod error;
pub mod evalstat;
pub mod featsel;
pub mod gbt;
pub mod lstm;
pub mod pipeline;
pub mod series;
pub mod synth;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Derives a child RNG seed from a base seed and a textual tag.
///
/// Used to give independent deterministic RNG streams to pipeline stages
/// (component stacks, cross-fit folds, permutation repetitions) without the
/// streams interfering when one stage changes its draw count.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then a splitmix64 finalizer to spread bits.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
