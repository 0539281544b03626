pub mod polyjet;
pub mod riemann;
pub mod surface;
pub mod obstruction;
pub mod conformal;
pub mod mass;
pub mod asymptotic;
pub mod cli;
