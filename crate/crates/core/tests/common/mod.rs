#![allow(dead_code)]

pub mod fixtures;
pub mod jsgen;
pub mod oracle;
pub mod pagegen;
pub mod reference;
pub mod sites;
