//! Migrating JavaScript packages to TypeScript with predicted type
//! annotations, and measuring the result with the TypeScript compiler.

pub mod checker;
pub mod convert;
pub mod fim;
pub mod metrics;
pub mod pipeline;
pub mod predictions;
pub mod project;
pub mod source;
pub mod typesyntax;
pub mod weave;
