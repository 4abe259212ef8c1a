pub mod desk;
pub mod oracle;
