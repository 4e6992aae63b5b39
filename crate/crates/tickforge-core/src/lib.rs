//! Timed multiset rewriting with explicit discrete time: specification
//! language, execution engine, delta-representation abstraction, and
//! property checkers for realizability, survivability, recoverability and
//! reliability, in both time-bounded and unbounded forms.

pub mod checkers;
pub mod delta;
pub mod engine;
pub mod generators;
pub mod model;
pub mod syntax;
