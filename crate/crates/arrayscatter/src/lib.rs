pub mod error;
pub mod lattice;
pub mod quad;
pub mod special;
pub mod propagator;
pub mod single_excitation;
pub mod two_excitation;
pub mod cross_section;
pub mod oracle;
pub mod cli;
