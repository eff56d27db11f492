//! Sonar-frame preprocessing and energy-aware streaming planning for
//! off-grid fish-monitoring stations.
//!
//! The crate has two halves. The frame chain ([`mog`], [`guided`],
//! [`channels`], [`pipeline`]) turns raw sonar intensities into a
//! three-plane input and gates out motion-free frames. The planner
//! ([`stratum`], [`pareto`], [`energy`], [`scheduler`]) profiles the
//! configurations of a frame cut into near-square strata. Each epoch it
//! picks one that fits the bandwidth and battery constraints.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod detector;
pub mod energy;
pub mod error;
pub mod frame_io;
pub mod guided;
pub mod mask;
pub mod mog;
pub mod pareto;
pub mod pipeline;
pub mod scheduler;
pub mod stratum;
pub mod synth;

pub use channels::{detect_motion, populate_channels, ChannelTriple, MotionParams, MotionResult, SavingLedger};
pub use error::{Error, Result};
pub use frame_io::{read_clip, write_clip, Clip, SonarFrame};
pub use guided::{guided_filter, GuidedFilterParams, Plane};
pub use mask::BinaryMask;
pub use mog::{ForegroundMask, MogField, MogParams};
pub use pareto::{pareto_front, DominanceRule, MetricTriple, ParetoMember, ParetoSet};
pub use pipeline::{PreprocessParams, Preprocessor};
pub use scheduler::{energy_budget, plan_epoch, simulate_day, ModelConstants, PolicyParams};
pub use stratum::{split_strata, Configuration, PowerModel, Route, StratumConfig, StratumLayout};
