//! Heralded protocols on ensemble qubits: excitation and readout pulses,
//! entangled-pair preparation, three-qubit cluster creation, destructive CZ
//! fusion, single-qubit measurement, plus reference cluster states.

mod cluster;
mod cz;
mod eme;
mod ghz;
mod measure;
mod pulses;

pub use cluster::{encode_cluster, logical_state, ClusterGraph};
pub use cz::{cz_fuse, cz_network, CzBranch, CzOutcome, CzStatus};
pub use eme::{
    eme_correction, eme_round_network, eme_round_probability, ideal_eme, leakage_fraction, prepare_eme,
    prepare_eme_with_retry, raw_eme, EmeAttempts,
};
pub use ghz::{ghz_network, ideal_eme_inputs, prepare_three_cluster, three_cluster_corrections};
pub use measure::{
    defer_unitary_check, deferral_deviation, measure_qubit, measurement_basis, MeasureOutcome,
    MeasureResult,
};
pub use pulses::{excite, readout, readout_swap, ExcitationParams, Polarization};

use crate::error::Result;
use crate::registry::{LogicalQubit, ModeRegistry};

pub(crate) fn qubit<'r>(registry: &'r ModeRegistry, label: &str) -> Result<&'r LogicalQubit> {
    Ok(registry.qubit(registry.qubit_by_label(label)?))
}
