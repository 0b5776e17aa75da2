//! Word survival: coding samples, discrete-time hazard networks, the Cox
//! baseline and time-dependent evaluation.

mod coding;
mod cox;
mod eval;
mod grid;
mod lh;
mod metrics;

pub use coding::{
    code_survival, code_timeline, community_months, lifespan, samples_tsv, word_timelines,
    CodingConfig, FeatureAveraging, SurvivalSample, WordTimelines,
};
pub use cox::{fit_cox, partial_log_likelihood, CoxConfig, CoxModel, Ties};
pub use eval::{
    assign_duration_indices, community_split, cox_table, evaluate_survival_models, CommunitySplit,
    CoxRow, SurvivalEvalConfig, SurvivalScore, Table3, Table4,
};
pub use grid::{make_grid, DurationGrid};
pub use lh::{
    lh_batch_loss, lh_loss, lh_train, survival_curve, LhConfig, LhModel, Mode, HAZARD_CLAMP,
};
pub use metrics::{concordance_td, integrated_brier, kaplan_meier, BrierResult, KaplanMeier};
