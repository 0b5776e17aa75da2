//! Lexical innovation counts and count models.

mod counts;
mod eval;
mod gbt;
mod metrics;
mod poisson;

pub use counts::{count_innovations, first_introductions, InnovationSample};
pub use eval::{evaluate_innovation_models, EvalConfig, ModelScore, Table2};
pub use gbt::{fit_gbt_poisson, GbtConfig, GbtModel, Tree, TreeNode};
pub use metrics::{mae, mean_poisson_deviance};
pub use poisson::{fit_poisson_irls, poisson_objective, PoissonConfig, PoissonModel};
