pub mod bench;
pub mod context;
pub mod corpus;
pub mod cps;
pub mod cps_concrete;
pub mod cps_kcfa;
pub mod exec;
pub mod fj;
pub mod intern;
pub mod mcfa;
pub mod report;
pub mod sexp;
pub mod solver;
pub mod soundness;
