//! Exact many-body machinery: occupation bases, sparse second-quantized
//! operators, spectral and Krylov propagation, Weyl displacements, the
//! limiting quadratic fluctuation dynamics, and joint characteristic
//! functions.

pub mod basis;
pub mod charfn;
pub mod evolve;
pub mod op;
pub mod quadratic;
pub mod weyl;

pub use basis::{OccupationBasis, Sector};
pub use charfn::{product_oracle_t0, JointCharfn};
pub use evolve::{evolve_state, lanczos_expm_multiply, EigPropagator, EvolveMethod};
pub use op::{
    annihilator, build_hamiltonian, creator, field_operator, ladder, number_operator,
    reduced_density_1, reduced_density_2, second_quantize, LadderKind, SparseOperator,
};
pub use quadratic::{
    assemble_quadratic_generator, evolve_quadratic, fluctuation_state, hartree_scalar_integral,
    pair_matrix,
};
pub use weyl::{
    coherent_state, product_state, required_n_max, vacuum, weyl, weyl_apply, weyl_matrix,
};
