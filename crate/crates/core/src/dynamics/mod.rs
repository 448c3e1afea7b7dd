//! Time evolution in the interaction picture of the undriven Hamiltonian:
//! closed Schrödinger dynamics, the Lindblad master equation and two-time
//! correlators.

mod basis;
mod closed;
mod correlator;
mod hamiltonian;
pub mod integrator;
mod master;

pub use basis::{
    build_channels, ActiveSpace, ChannelKind, DecayRates, DressedBasis, DressedState, JumpChannel,
    DEFAULT_BARE_MARGIN, DEFAULT_EXTRA_STATES, MIN_RATE,
};
pub use closed::{check_normalized, propagate_closed, ClosedRun, Schrodinger};
pub use correlator::{correlate_from, two_time_correlator, CorrelatorSeries};
pub use hamiltonian::{
    build_interaction_hamiltonian, DenseHamiltonian, HamiltonianSource, InteractionHamiltonian, COUPLING_FLOOR,
};
pub use integrator::{Dopri5, Generator, Tolerances};
pub use master::{
    master_populations, propagate_master, DenseLindblad, DensityMatrix, Dissipator, MasterDiagnostics, MasterGenerator,
    MasterOptions, POSITIVITY_FLOOR,
};
