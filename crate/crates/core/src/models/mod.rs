//! Forward models with their adjoints.

mod convolution;
mod diffusion;
mod flow;

pub use convolution::{convolve, convolve_dense, convolve_fft, KernelKind, KernelSpec, FFT_THRESHOLD};
pub use diffusion::{
    closed_form_1d, diffusion_solve, pat_forward, pat_forward_field, pat_gradient_adjoint, DiffusionProblem,
    DEFAULT_GAMMA, DEFAULT_KAPPA, DEFAULT_SOURCE,
};
pub use flow::{flow_translate, project_axes, FlowParams, SUPPORT_TOL};
