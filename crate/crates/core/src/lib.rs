//! Reactive synthesis from samples: LTL specifications, bounded safety games,
//! reward-optimal strategies for sample trees and their completion into
//! finite-state controllers.

pub mod alphabet;
pub mod automata;
pub mod complete;
pub mod hardness;
pub mod ltl;
pub mod machines;
pub mod optimize;
pub mod pipeline;
pub mod safety;
pub mod sampling;
