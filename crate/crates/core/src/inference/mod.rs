//! Bayesian data analysis: MCMC fitting of prior models and the joint
//! endorsement model.

pub mod mcmc;
pub mod models;
pub mod summary;

pub use mcmc::{sample, McmcConfig, ParamSpec, PosteriorSamples, StepSizes, Target, Transform};
pub use models::{
    distortion_check, fit_beta_mixture, fit_isolated, fit_joint, fit_single_beta, map_estimates, predict_items,
    summarize, DistortionReport, EndorsementItem, ItemPrediction, JointData, JointModel, ModelKind, PriorData,
    PropertyBlock, ReferentBlock, ReferentSource,
};
pub use summary::{ks_distance, map_and_hpd, posterior_predictive, MapHpd};
