//! County contiguity weights and Local Moran's I.

mod lattice;
mod lisa;
mod weights;

pub use lattice::{iowa_lattice, lattice_edges, IOWA_LATTICE_COLS, IOWA_LATTICE_CSV};
pub use lisa::{classify_cluster, local_i_values, local_morans, LisaCluster, LisaConfig, LisaResult, LisaRow};
pub use weights::SpatialWeights;
