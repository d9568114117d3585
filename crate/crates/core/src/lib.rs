//! Supervisory control toolkit for modular discrete-event plants: synthesis,
//! DSM clustering, localization into communicating local supervisors,
//! delay-robustness analysis, mutex repair and a distributed simulator.

pub mod automaton;
pub mod clustering;
pub mod controller;
pub mod delay;
pub mod dsm;
pub mod localization;
pub mod error;
pub mod model;
pub mod mutex;
pub mod pipeline;
pub mod ops;
pub mod predicate;
pub mod sim;
pub mod pump_cellar;
pub mod random;
pub mod synthesis;
pub mod tree;
pub mod toys;

pub use automaton::{automaton, Automaton, AutomatonBuilder, Event, StateId, Trace};
pub use error::{Error, Result};
