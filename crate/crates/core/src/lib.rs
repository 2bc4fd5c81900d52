pub mod aggregator;
pub mod domain;
pub mod eop_audit;
pub mod estimator;
pub mod probit;
pub mod questiongen;
pub mod simulator;
