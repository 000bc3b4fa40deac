use thiserror::Error;

use crate::network::{ChannelId, SuId};

/// Errors raised by the game, detection and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coincident nodes: {0}")]
    CoincidentNodes(String),

    #[error("unknown SU id {0}")]
    UnknownSu(SuId),

    #[error("unknown channel id {0}")]
    UnknownChannel(ChannelId),

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    #[error("coalition of size {size} exceeds channel population {population}")]
    CoalitionTooLarge { size: usize, population: usize },

    #[error("block {0} is not part of the partition")]
    BlockNotInPartition(usize),

    #[error("blocks must be pairwise distinct members of the partition")]
    BlocksNotDistinct,

    #[error("expansion over {0} competing coalitions refused (limit 30)")]
    ExpansionTooLarge(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("degenerate coalition: all payoffs are zero")]
    DegenerateCoalition,

    #[error("SU {su} is not a member of the coalition on channel {channel}")]
    NotAMember { su: SuId, channel: ChannelId },

    #[error("SU {su} is already a member of the coalition on channel {channel}")]
    AlreadyAMember { su: SuId, channel: ChannelId },

    #[error("set of size {0} is too large for exhaustive enumeration")]
    EnumerationTooLarge(usize),

    #[error("zero energy in metrics window")]
    ZeroEnergy,

    #[error("empty metrics window")]
    EmptyWindow,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
