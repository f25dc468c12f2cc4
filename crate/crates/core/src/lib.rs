//! Polar code construction for binary memoryless symmetric channels.
//!
//! Channels are carried as finite BSC mixtures ([`MassDistribution`]). The
//! construction evolves the root channel down the polarization tree with
//! [`polar::transform_pair`], keeping every intermediate channel to at most
//! `k` masses with one of the greedy quantizers in [`quantize`], and finally
//! picks the information set from the leaf reliabilities: the bit-error
//! probability by default, or the Bhattacharyya parameter.

pub mod channel;
pub mod construct;
pub mod error;
pub mod oracle;
pub mod polar;
pub mod quantize;
mod sum;
pub mod tables;

pub use channel::{ChannelSpec, Kernel, Mass, MassDistribution};
pub use construct::{CodeDesign, ConstructionConfig, IndexOrder, LeafReport, Mode, Reliability};
pub use error::{Error, Result};
pub use quantize::{Direction, QuantizeReport};
