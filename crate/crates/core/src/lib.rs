//! Dynamics of weighted composition operators `C_{w,f} phi = w * (phi o f)`
//! on atomic `L^p` spaces and discrete sequence spaces.

pub mod cfs;
pub mod conjugacy;
pub mod error;
pub mod growth;
pub mod hopf;
pub mod io;
pub mod lp;
pub mod plot;
pub mod scalar;
pub mod system;
pub mod verdict;

pub use error::{Error, Result};
pub use scalar::{Exponent, LogScalar, Magnitude, Phase, Scalar};
pub use system::{
    validate, AtomId, AtomicSystem, BoundednessCertificate, MapKind, Orbit, SampleFunction, ScalarField,
    TailSpec,
};
pub use verdict::{AnalysisConfig, Notion, Status, Verdict};
