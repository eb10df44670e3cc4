//! distmet: an exact numerical workbench for distributed phase metrology
//! through passive linear-optical networks.
//!
//! The crate simulates truncated-Fock-space evolution through beam-splitter
//! meshes, computes the quantum Fisher information for weighted phase
//! combinations by two independent routes, evaluates the closed-form
//! sensitivity bounds for Fock and general separable inputs, and runs the
//! twin-Fock hoarding protocol that attains Heisenberg scaling when the
//! photons are concentrated in two input ports.

pub mod bounds;
pub mod fock;
pub mod network;
pub mod optimizer;
pub mod protocols;
pub mod qfi;
pub mod sweep;
