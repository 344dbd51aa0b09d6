//! Experiment harness tying the solvers to the bi-fidelity core: model
//! pairs, offline/online pipelines, convergence and sweep studies, CSV
//! reporting. The `bifi` binary exposes these as subcommands.

pub mod config;
pub mod experiments;
pub mod pairs;
pub mod report;
