//! The session contract between the bot and a page.

use std::time::Duration;

use thiserror::Error;

use crate::dom::ElementPath;
use crate::events::EventType;

pub mod cdp;
pub mod sim;

pub use cdp::{cdp_load, CdpConfig, CdpSession, ENDPOINT_ENV};
pub use sim::{sim_load, Effect, ListenerSpec, ScriptValidationError, SimElement, SimPage, SimPageScript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DriverError {
    #[error("browser endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("navigation timed out: {0}")]
    NavigationTimeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("session lost: {0}")]
    SessionLost(String),
    #[error("path {0} does not resolve to exactly one element")]
    UnresolvedPath(ElementPath),
}

impl DriverError {
    /// Errors worth another attempt with the same session.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            DriverError::EndpointUnreachable(_) | DriverError::NavigationTimeout(_) | DriverError::Protocol(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DispatchStatus {
    Dispatched,
    /// The path matched no element, or several.
    NotFound,
    /// A handler did not finish in time.
    TimedOut,
}

/// What sits on top at the center of an element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HitResult {
    /// The element has no box, or it or an ancestor is hidden.
    Hidden,
    Hit {
        topmost: ElementPath,
        /// The topmost node is the element or one of its descendants.
        on_target: bool,
    },
}

impl HitResult {
    pub fn reaches_target(&self) -> bool {
        matches!(self, HitResult::Hit { on_target: true, .. })
    }
}

/// A loaded page the bot can inspect and poke.
///
/// Elements are addressed only by [`ElementPath`], the one identity that
/// survives a reload.
pub trait PageSession {
    fn load(&mut self, url: &str) -> Result<(), DriverError>;
    fn reload(&mut self) -> Result<(), DriverError>;
    fn current_dom(&mut self) -> Result<String, DriverError>;
    /// Listeners on `window` and `document` are reported under the path `/`.
    fn listener_dump(&mut self) -> Result<Vec<(ElementPath, EventType)>, DriverError>;
    fn dispatch(&mut self, path: &ElementPath, event: &EventType) -> Result<DispatchStatus, DriverError>;
    /// Console lines since the previous drain.
    fn drain_console(&mut self) -> Result<Vec<String>, DriverError>;
    fn current_url(&mut self) -> Result<String, DriverError>;
    fn hit_test(&mut self, path: &ElementPath) -> Result<HitResult, DriverError>;
    /// Waits for async handlers to finish logging.
    fn settle(&mut self, window: Duration) -> Result<(), DriverError>;
}

impl<S: PageSession + ?Sized> PageSession for Box<S> {
    fn load(&mut self, url: &str) -> Result<(), DriverError> {
        (**self).load(url)
    }
    fn reload(&mut self) -> Result<(), DriverError> {
        (**self).reload()
    }
    fn current_dom(&mut self) -> Result<String, DriverError> {
        (**self).current_dom()
    }
    fn listener_dump(&mut self) -> Result<Vec<(ElementPath, EventType)>, DriverError> {
        (**self).listener_dump()
    }
    fn dispatch(&mut self, path: &ElementPath, event: &EventType) -> Result<DispatchStatus, DriverError> {
        (**self).dispatch(path, event)
    }
    fn drain_console(&mut self) -> Result<Vec<String>, DriverError> {
        (**self).drain_console()
    }
    fn current_url(&mut self) -> Result<String, DriverError> {
        (**self).current_url()
    }
    fn hit_test(&mut self, path: &ElementPath) -> Result<HitResult, DriverError> {
        (**self).hit_test(path)
    }
    fn settle(&mut self, window: Duration) -> Result<(), DriverError> {
        (**self).settle(window)
    }
}
