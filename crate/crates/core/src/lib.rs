//! Pilot-pattern adaptation for multi-user MIMO OFDM.
//!
//! Users are grouped by channel statistics (Doppler spread and delay
//! spread). Each group gets the sparsest pilot lattice its channel allows,
//! RBs are pre-assigned to groups, and the resulting spectral efficiency is
//! compared with a conventional scheduler that uses one worst-case pattern
//! everywhere.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod model;
pub mod pattern;
pub mod phy;
pub mod scheduler;
pub mod seed;

pub use channel::{
    builtin_profiles, max_spacing, ChannelProfile, ChannelRealization, PilotSpacing, Tap,
};
pub use error::{Error, Result};
pub use model::{
    build_population, FadingSpec, Numerology, SystemConfig, User, UserId, UserPopulation,
};
pub use pattern::{PatternRegistry, PilotPattern};
pub use phy::Direction;
pub use scheduler::{PickerPolicy, RbMapping, ScheduleAssignment, SchedulerMode};
