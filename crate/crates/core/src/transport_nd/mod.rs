//! Transport beyond 1D: closed forms, the 2D Monge-Ampère solver and its
//! adjoint, and the weighted `Ḣ^{-1}` surrogate.

mod gaussian;
mod monge_ampere;
pub mod periodic;
mod surrogate;

pub use gaussian::{sqrtm_spd, w2_affine, w2_gaussian, AffineParams, GaussianParams, MomentPair};
pub use monge_ampere::{
    push_forward_l1, solve_adjoint_ma_2d, solve_monge_ampere_2d, solve_monge_ampere_2d_with, w2_2d,
    w2_gradient_2d, w2_kernel_from, MaConfig, MaDiagnostics, MongeAmpereSolution, ADJOINT_RTOL,
};
pub use surrogate::{surrogate_solve, weighted_hm1_surrogate, SurrogateSolution};
