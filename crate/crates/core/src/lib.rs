pub mod cli;
pub mod explain;
pub mod io;
pub mod linalg;
pub mod model;
pub mod prior;
pub mod relabel;
pub mod rngdist;
pub mod sampler;
