pub mod autotag;
pub mod collection;
pub mod datapackage;
pub mod metadata;
pub mod report;
pub mod tabular;
pub mod units;
