//! Objective assembly, gradients through forward models, steepest-descent
//! inversion and a finite-difference gradient oracle.

mod descent;
mod fd;
mod metric;
mod model;

pub use descent::{
    gradient_wrt_model, objective_and_gradient, objective_at, run_inversion, InversionConfig, InversionTrace, StepPolicy,
    Termination, TraceRow,
};
pub use fd::{fd_gradient, fd_gradient_with, FdReport, FdRow};
pub use metric::{data_kernel, evaluate_objective, evaluate_objective_with, MetricOptions, MismatchSpec};
pub use model::{ConvolutionModel, DiagonalModel, FlowModel, ForwardModel, PatModel};

#[cfg(test)]
mod tests;
