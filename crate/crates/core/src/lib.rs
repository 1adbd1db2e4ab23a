pub mod bot;
pub mod cache;
pub mod dom;
pub mod driver;
pub mod events;
pub mod js;
pub mod pipeline;
pub mod report;
