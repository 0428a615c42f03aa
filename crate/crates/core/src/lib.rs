pub mod checkpoint_store;
pub mod circuit_ir;
pub mod restoration;
pub mod runtime;
pub mod scalar;
pub mod sim;

/// Double-precision simulator state, the runtime's default.
pub type StateVector64 = sim::StateVector<f64>;
pub type StateVector32 = sim::StateVector<f32>;
