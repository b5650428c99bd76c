//! Numerical laboratory for dense-measurement models: survival of repeatedly
//! checked coherent states, path products, an annular billiard with a hole,
//! multibarrier scattering, multitrap diffusion, observer-sequence counting
//! and Szilard-cylinder entropy ensembles.

pub mod error;
pub mod numerics;

pub use error::{LabError, LabResult};
pub mod paths;
pub mod reactions;
pub mod barriers;
pub mod table;
pub mod band;
pub mod traps;
pub mod everett;
pub mod szilard;
pub mod billiard;
pub mod cli;
