//! Status updates for energy-harvesting sensors observing correlated sensing
//! points (CSPs). A data fusion center schedules sensors over error-prone
//! channels to keep the age of correlated information (AoCI) low, while the
//! sensors' true battery states stay hidden between successful deliveries.
//!
//! The crate provides:
//!
//! - [`env`]: the partially observable simulator (scheduling, activation,
//!   delivery, importance aggregation, AoCI evolution, battery dynamics).
//! - [`actspace`]: per-CSP qualified-subset subspaces, canonical indexing,
//!   and the primitive → proto → valid action pipeline.
//! - [`nn`]: a small double-precision neural toolkit (dense + LSTM layers,
//!   exact backprop through time, RMSprop, EMA blending, gradient checking).
//! - [`replay`]: episodic experience storage with contiguous-sequence
//!   sampling.
//! - [`agent`]: the recurrent soft actor-critic learner with action
//!   decomposition, plus its no-decomposition variant, a recurrent Q-learning
//!   baseline, and a random policy.
//! - [`harness`]: configuration, the train/evaluate loop, metrics files,
//!   checkpoints, and an exact dynamic-programming oracle for the soft value
//!   recursions on tiny instances.

pub mod actspace;
pub mod agent;
pub mod env;
pub mod harness;
pub mod mat;
pub mod nn;
pub mod replay;
pub mod seeds;
