//! Layered bidirectional time surfaces (Labits) for event cameras, the
//! classic baseline representations, active-pixel local optical flow and
//! Bézier trajectory tooling, plus a synthetic scene oracle and a small
//! benchmark harness.

pub mod aplof;
pub mod bench;
pub mod cli;
mod codec;
pub mod event;
pub mod flow;
pub mod repr;
pub mod synth;
pub mod tensor;
pub mod trajectory;
pub mod viz;

pub use codec::FormatError;
pub use event::{Event, EventError, EventStream, Polarity, SensorGeometry, TimeWindow};
pub use flow::FlowField;
pub use repr::{Representation, Threading, WindowSpec};
pub use tensor::DenseTensor;
