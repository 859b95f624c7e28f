//! Null-aware integrity constraints, repairs with null values, repair
//! programs and consistent query answering.

pub mod asp;
pub mod compiler;
pub mod constraints;
pub mod cqa;
pub mod lexer;
pub mod relational;
pub mod satisfaction;
pub mod repair;
