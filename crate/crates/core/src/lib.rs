//! Traffic abstractions of nonlinear event-triggered control systems.

pub mod symkernel;
pub mod etcmodel;
pub mod isochron;
pub mod reference;
pub mod partition;
pub mod quotient;
pub mod sim;
pub mod reach;
pub mod pipeline;
