//! Synthetic instances with known ground truth: random and structured
//! single-layer generators, a random two-layer classifier, single-step attacks
//! on it, and the experiments built on top (error-bound sweeps, 2-D loss
//! landscapes).

mod attack;
mod classifier;
mod family;
mod instance;
mod landscape;
mod sweep;

pub use attack::{attack, build_attack_dictionary, single_step_attack, AttackLabeling, AttackType};
pub use classifier::SyntheticClassifier;
pub use family::{make_generator, WeightFamily, HADAMARD_4};
pub use instance::{generate_instance, make_inversion, make_realizable, InstanceSpec, RealizableInstance};
pub use landscape::{count_basins, landscape_grid, Landscape};
pub use sweep::{mu_vs_m_sweep, run_mu_trial, MuTrial, SweepConfig, SweepRow};

/// Mixes a base seed with trial coordinates (splitmix64 finaliser).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
