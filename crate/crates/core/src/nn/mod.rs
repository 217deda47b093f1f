//! Minimal double-precision neural toolkit with exact analytic gradients:
//! dense layers, an LSTM layer unrolled over sequences, He initialization,
//! RMSprop, exponential-moving-average blending, a finite-difference gradient
//! checker, and the checkpoint format.

mod checkpoint;
mod dense;
mod gradcheck;
mod lstm;
mod net;
mod optim;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use dense::{Activation, Dense, DenseGrads};
pub use gradcheck::{compare_grads, grad_check, grad_check_seq_len, seq_loss, seq_loss_grads, GradCheckReport};
pub use lstm::{Lstm, LstmGrads, LstmStepCache};
pub use net::{NetGrads, NetState, RecurrentNet, SeqCache, BLOCK_COUNT, BLOCK_NAMES};
pub use optim::{ema_blend, ema_blend_net, he_init, rmsprop_step, RmsProp};
