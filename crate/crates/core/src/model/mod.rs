//! Mode ladder, coupling kernels and population states.

mod coupling;
mod ladder;
pub(crate) mod state;

pub use coupling::{
    ConstantProduct, CouplingConstructor, CouplingKernel, CouplingModel, CouplingRegistry,
    ExponentialDecay, Tabular,
};
pub use ladder::ModeLadder;
pub use state::{InitialCondition, PopulationState, QuadraticCoupling};
