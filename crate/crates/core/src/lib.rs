pub mod deform;
pub mod expr;
pub mod flip;
pub mod geometry;
pub mod holonomy;
pub mod report;
pub mod specfile;
pub mod tolerances;
pub mod transport;
pub mod zoo;
