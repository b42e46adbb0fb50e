//! Pole series, the lacunary series, and exact coefficient certificates.

pub mod certify;
pub mod lacunary;
pub mod pole_series;

pub use certify::{
    radius_witness, scan_witness, smoothness_constants, CoefficientModel, SmoothnessCertificate, TaylorWitness,
};
pub use lacunary::{lacunary_coefficient, LacunarySeries, PoleApproach};
pub use pole_series::{eval_f, eval_fn, liminf_check, Evaluation, PoleSeries};
