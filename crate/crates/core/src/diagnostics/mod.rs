//! Quantities from the convergence analysis, evaluated numerically.

mod bounds;
mod lemmas;
mod mu;
mod pl;
mod rates;
mod spectral;
mod wdc;

pub use bounds::{analytic_rho_eps, SmoothnessConstants};
pub use lemmas::{
    cocoercivity_at, segment_curvature, verify_cocoercivity, verify_zeta_bound, zeta_bound_at, LemmaReport, LemmaTrial,
    SegmentCurvature,
};
pub use mu::estimate_mu_iterate;
pub use pl::prox_pl_quantity;
pub use rates::{step_window, theoretical_rate, StepWindow};
pub use spectral::{
    exact_hessian_single_layer, hessian_extremal_eigs, hessian_extremal_eigs_with_step, SpectralEstimate,
};
pub use wdc::{check_wdc, estimate_q, match_wdc_scale, q_identity_error, WdcPair, WdcReport, MIN_MC_SAMPLES};
