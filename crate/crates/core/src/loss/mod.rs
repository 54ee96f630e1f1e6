//! Temporal-difference construction, the point and difference losses, the
//! sign-inconsistency weight, and the combined objective with its gradient.

mod diff;
mod metrics;
mod objective;

pub use diff::{anchor_context, tdp, tdp_adjoint, tdt, DiffSpec};
pub use metrics::{evaluate_metrics, MetricsReport};
pub use objective::{
    combined_loss, loss_grad_wrt_prediction, point_loss, point_loss_with_grad, rho, sgn, tdt_loss, BaseLoss,
    LossConfig, LossMode, LossReport,
};
