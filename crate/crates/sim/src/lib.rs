//! Scenario replay against the consent-boundary platform, with an
//! independent brute-force oracle and a random world generator.

pub mod driver;
pub mod generate;
pub mod http;
pub mod oracle;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod shadow;

pub use driver::{Driver, InProcess};
pub use http::HttpDriver;
pub use replay::{replay, ReplayOptions};
pub use report::ReplayReport;
pub use scenario::Scenario;
