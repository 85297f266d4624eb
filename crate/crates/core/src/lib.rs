//! Core of the ontology reasoning workbench.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that is pure
//! computation: the knowledge-base model ([`kb`]), the rule language
//! ([`dsl`]), the symbolic reasoner used as ground-truth oracle
//! ([`reasoner`]), benchmark generators ([`datagen`]), the recursive reasoning
//! network ([`rrn`]) and the metric and training logic ([`metrics`],
//! [`harness`]). File IO and the command line live in `rrn-workbench`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod dsl;
pub mod fuzz;
pub mod harness;
pub mod kb;
pub mod metrics;
pub mod reasoner;
pub mod rrn;
