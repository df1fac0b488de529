//! Road-network inference from GPS trajectories.

pub mod baseline;
pub mod eval;
pub mod geo;
pub mod graph;
pub mod graph_io;
pub mod refine;
pub mod simplify;
pub mod synth;
pub mod traj;
pub mod traj_index;
pub mod tracer;
