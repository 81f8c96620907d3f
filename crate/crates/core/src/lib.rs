pub mod cli;
pub mod connection;
pub mod error;
pub mod mpkernel;
pub mod oracle;
pub mod series;
pub mod validation;
pub mod roots;
