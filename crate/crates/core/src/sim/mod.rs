//! Deterministic discrete-event core: clock, event queue and seeded streams.

mod engine;
mod rng;
mod time;

pub use engine::{Engine, Event, EventHandle, EventKind, TraceEntry};
pub use rng::{derive_seed, exponential_from_uniform, mix64, RngStream};
pub use time::SimTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("cannot schedule at t={fire_at}s, clock is already at t={clock}s")]
    SchedulingInPast { fire_at: f64, clock: f64 },
    #[error("rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("uniform index range must be at least 1")]
    ZeroRange,
    #[error("event {0} is not pending (already fired or cancelled)")]
    NotPending(u64),
}
