//! 1-D magneto-viscoelastic simulator: displacement dynamics with a memory
//! convolution against a weakly singular relaxation kernel, coupled to a
//! penalized Ginzburg-Landau magnetization equation. Includes the translated
//! regular approximating problems, energy-inequality diagnostics, and
//! parameter-sweep convergence experiments.

pub mod diagnostics;
pub mod dynamics;
pub mod experiments;
pub mod field;
pub mod kernel;
pub mod memory;
mod tridiag;

pub use dynamics::{run, ModelParams, RunMode, Trajectory};
pub use field::{ForcingTag, Grid, InitialData, ProfileTag};
pub use kernel::{make_kernel, KernelSpec, RelaxationKernel};
