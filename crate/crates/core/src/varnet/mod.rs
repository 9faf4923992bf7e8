//! Unrolled variational network: forward reconstruction, loss, exact
//! gradients and parameter files.

mod conv;
mod io;
mod network;
mod params;

pub use conv::{correlate_add, correlate_adjoint_add, correlate_weight_grad};
pub use io::{read_params, write_params, params_from_bytes, params_to_bytes};
pub use network::{batch_gradient, cost_over_dataset, loss, reconstruct, vn_backward, vn_forward};
pub use params::{Gradients, VnConfig, VnParams, ALPHA_INIT};
