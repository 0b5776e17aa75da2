//! Monthly community interaction graphs built from threaded comment corpora,
//! structural features over those graphs, and the statistical models that
//! relate community structure to how neologisms are introduced, how long they
//! survive, and how widely they spread.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] parses comments, tokenizes bodies and produces per
//!   community-month usage tables; [`synth`] generates corpora with planted
//!   ground truth.
//! * [`netbuild`] builds intra-community reply-proximity graphs and weighted
//!   inter-community graphs.
//! * [`netstats`] computes the fifteen structural features, including the
//!   rewiring-adjusted clustering and assortativity.
//! * [`featprep`] log-transforms, standardizes and PCA-whitens features.
//! * [`innovate`] counts first introductions and fits Poisson regression and
//!   Poisson-loss gradient boosted trees.
//! * [`survive`] codes word lifetimes and fits the discrete-time Logistic
//!   Hazard network and a Cox baseline.
//! * [`levelling`] measures dissemination and its power-law shape over time.
//! * [`pipeline`] wires everything into resumable stages driven by one
//!   config file.

pub mod corpus;
pub mod error;
pub mod featprep;
pub mod graph;
pub mod innovate;
pub mod levelling;
pub mod linalg;
pub mod month;
pub mod netbuild;
pub mod netstats;
pub mod pipeline;
pub mod seed;
pub mod survive;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{GraphKey, SnapshotGraph};
pub use month::MonthKey;
