//! Breadth-first discovery of which interactions unlock which.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{enumerate_elements, Document, ElementPath};
use crate::driver::{DispatchStatus, DriverError, PageSession};
use crate::events::{DependencyTree, Event, EventRef};
use crate::js::{UsedSet, DEFAULT_PROBE_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Triggered,
    Blocked,
    NavigatedAway,
    Timeout,
}

/// Whether a trigger probed a new event or replayed a chain to reach a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Probe,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub event: Event,
    pub outcome: Outcome,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub refreshes: usize,
    pub triggers: usize,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    /// Quiet period after each dispatch for async handlers.
    #[serde(with = "millis")]
    pub settle: Duration,
    /// Upper bound on trigger attempts, replays included.
    pub max_triggers: usize,
    pub probe_token: String,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            settle: Duration::from_millis(200),
            max_triggers: 20_000,
            probe_token: DEFAULT_PROBE_TOKEN.to_string(),
        }
    }
}

impl DiscoveryConfig {
    /// No settle window: simulated handlers log synchronously.
    pub fn simulated() -> Self {
        DiscoveryConfig {
            settle: Duration::ZERO,
            ..DiscoveryConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryResult {
    #[serde(serialize_with = "tree_json")]
    pub tree: DependencyTree,
    pub used: UsedSet,
    pub trigger_log: Vec<TriggerRecord>,
    pub stats: DiscoveryStats,
    /// False when discovery stopped early.
    pub complete: bool,
}

fn tree_json<S: serde::Serializer>(t: &DependencyTree, s: S) -> Result<S::Ok, S::Error> {
    let v: serde_json::Value =
        serde_json::from_str(&crate::events::serialize_tree(t)).map_err(serde::ser::Error::custom)?;
    v.serialize(s)
}

#[derive(Debug, Error)]
pub enum DiscoverError {
    #[error("page session lost: {reason}")]
    SessionLost {
        reason: DriverError,
        partial: Box<DiscoveryResult>,
    },
    #[error("more than {limit} trigger attempts")]
    BudgetExceeded {
        limit: usize,
        partial: Box<DiscoveryResult>,
    },
}

impl DiscoverError {
    pub fn partial(&self) -> &DiscoveryResult {
        match self {
            DiscoverError::SessionLost { partial, .. } | DiscoverError::BudgetExceeded { partial, .. } => partial,
        }
    }
}

/// True iff `e` names exactly one element that is visible and on top at its center.
pub fn success_criterion<S: PageSession + ?Sized>(session: &mut S, e: &Event) -> Result<bool, DriverError> {
    match session.hit_test(&e.xpath) {
        Ok(hit) => Ok(hit.reaches_target()),
        Err(DriverError::UnresolvedPath(_)) => Ok(false),
        Err(err) => Err(err),
    }
}

fn without_fragment(url: &str) -> &str {
    url.split('#').next().unwrap_or(url)
}

/// Fires `e` once, or three times for click types, recording probe lines
/// into `used`. Returns to `page_url` if the page navigated away.
pub fn trigger<S: PageSession + ?Sized>(
    session: &mut S,
    e: &Event,
    page_url: &str,
    config: &DiscoveryConfig,
    used: &mut UsedSet,
) -> Result<Outcome, DriverError> {
    let times = if e.event_type.is_click_type() { 3 } else { 1 };
    for k in 0..times {
        if !success_criterion(session, e)? {
            // A later click may be covered by what the first one opened.
            return Ok(if k == 0 { Outcome::Blocked } else { Outcome::Triggered });
        }
        let status = session.dispatch(&e.xpath, &e.event_type)?;
        session.settle(config.settle)?;
        used.record_lines(session.drain_console()?, &config.probe_token);
        match status {
            DispatchStatus::Dispatched => {}
            DispatchStatus::NotFound if k == 0 => return Ok(Outcome::Blocked),
            DispatchStatus::NotFound => return Ok(Outcome::Triggered),
            DispatchStatus::TimedOut => return Ok(Outcome::Timeout),
        }
        if without_fragment(&session.current_url()?) != without_fragment(page_url) {
            session.load(page_url)?;
            used.record_lines(session.drain_console()?, &config.probe_token);
            return Ok(Outcome::NavigatedAway);
        }
    }
    Ok(Outcome::Triggered)
}

struct Bot<'s, S: PageSession + ?Sized> {
    session: &'s mut S,
    config: &'s DiscoveryConfig,
    page_url: String,
    tree: DependencyTree,
    used: UsedSet,
    log: Vec<TriggerRecord>,
    stats: DiscoveryStats,
    pending: Vec<Event>,
    known: HashSet<Event>,
    untriggerable: Vec<Event>,
    /// Listeners present in the current state.
    present: HashSet<Event>,
}

enum Stop {
    Driver(DriverError),
    Budget,
}

impl From<DriverError> for Stop {
    fn from(e: DriverError) -> Self {
        Stop::Driver(e)
    }
}

impl<S: PageSession + ?Sized> Bot<'_, S> {
    fn drain(&mut self) -> Result<(), DriverError> {
        let lines = self.session.drain_console()?;
        self.used.record_lines(lines, &self.config.probe_token);
        Ok(())
    }

    /// Adds events not seen before, ordered by element position then type.
    fn admit(&mut self, events: Vec<Event>, order: &HashMap<ElementPath, usize>) {
        let mut fresh: Vec<Event> = events
            .into_iter()
            .filter(|e| self.known.insert(e.clone()))
            .collect();
        fresh.sort_by(|a, b| {
            let rank = |e: &Event| order.get(&e.xpath).copied().unwrap_or(usize::MAX);
            rank(a)
                .cmp(&rank(b))
                .then_with(|| a.event_type.as_str().cmp(b.event_type.as_str()))
        });
        for e in fresh {
            if e.event_type.is_triggerable() {
                self.pending.push(e);
            } else {
                self.untriggerable.push(e);
            }
        }
    }

    fn document_order(&mut self) -> Result<HashMap<ElementPath, usize>, DriverError> {
        let doc = Document::parse(&self.session.current_dom()?);
        let mut order: HashMap<ElementPath, usize> = HashMap::new();
        order.insert(ElementPath::document(), 0);
        for (i, (_, p)) in enumerate_elements(&doc).into_iter().enumerate() {
            order.entry(p).or_insert(i + 1);
        }
        Ok(order)
    }

    fn scrape(&mut self) -> Result<(), DriverError> {
        let dump = self.session.listener_dump()?;
        let events = crate::events::events_from_listeners(&dump);
        self.present = events.iter().cloned().collect();
        if events.iter().any(|e| !self.known.contains(e)) {
            let order = self.document_order()?;
            self.admit(events, &order);
        }
        Ok(())
    }

    fn fire(&mut self, e: &Event, phase: Phase) -> Result<Outcome, Stop> {
        if self.stats.triggers >= self.config.max_triggers {
            return Err(Stop::Budget);
        }
        self.stats.triggers += 1;
        let outcome = if self.present.contains(e) {
            trigger(&mut *self.session, e, &self.page_url, self.config, &mut self.used)?
        } else {
            Outcome::Blocked
        };
        self.log.push(TriggerRecord {
            event: e.clone(),
            outcome,
            phase,
        });
        Ok(outcome)
    }

    /// Reloads and replays the chain leading to `node`, `node` included.
    /// False when some step no longer fires.
    fn enter(&mut self, node: EventRef) -> Result<bool, Stop> {
        self.session.reload()?;
        self.stats.refreshes += 1;
        self.drain()?;
        self.scrape()?;
        let mut chain = self.tree.chain(node);
        chain.push(node);
        for r in chain {
            let Some(e) = self.tree.event(r).cloned() else { continue };
            if self.fire(&e, Phase::Replay)? != Outcome::Triggered {
                return Ok(false);
            }
            self.scrape()?;
        }
        Ok(true)
    }

    fn run(&mut self) -> Result<(), Stop> {
        let mut queue = VecDeque::from([self.tree.base()]);
        while let Some(parent) = queue.pop_front() {
            // Entered even with nothing pending: the state may add listeners.
            if !self.enter(parent)? {
                continue;
            }
            let mut i = 0;
            while i < self.pending.len() {
                let e = self.pending[i].clone();
                match self.fire(&e, Phase::Probe)? {
                    Outcome::Triggered | Outcome::NavigatedAway => {
                        self.pending.remove(i);
                        queue.push_back(self.tree.attach(parent, e));
                        if !self.enter(parent)? {
                            break;
                        }
                    }
                    Outcome::Blocked => i += 1,
                    Outcome::Timeout => {
                        i += 1;
                        if !self.enter(parent)? {
                            break;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(mut self, started: Instant, complete: bool) -> DiscoveryResult {
        for e in self.pending.drain(..).chain(self.untriggerable.drain(..)) {
            self.tree.add_orphan(e);
        }
        self.stats.duration_ms = started.elapsed().as_millis() as u64;
        DiscoveryResult {
            tree: self.tree,
            used: self.used,
            trigger_log: self.log,
            stats: self.stats,
            complete,
        }
    }
}

/// Explores the page open in `session`, starting from `events`.
///
/// Events found later, as handlers add listeners, join the search as they
/// appear. Every probe line seen on the way ends up in the used set.
pub fn discover<S: PageSession + ?Sized>(
    session: &mut S,
    events: &[Event],
    config: &DiscoveryConfig,
) -> Result<DiscoveryResult, DiscoverError> {
    let started = Instant::now();
    let mut bot = Bot {
        page_url: String::new(),
        session,
        config,
        tree: DependencyTree::new(),
        used: UsedSet::new(),
        log: Vec::new(),
        stats: DiscoveryStats::default(),
        pending: Vec::new(),
        known: HashSet::new(),
        untriggerable: Vec::new(),
        present: HashSet::new(),
    };
    let setup = (|| -> Result<(), DriverError> {
        bot.drain()?;
        bot.page_url = bot.session.current_url()?;
        let order = bot.document_order()?;
        // Listeners present at load are known; only later ones join on their own.
        let at_load = bot.session.listener_dump()?;
        bot.known.extend(crate::events::events_from_listeners(&at_load));
        let mut unique = Vec::new();
        let mut seen = HashSet::new();
        for e in events {
            if seen.insert(e.clone()) {
                unique.push(e.clone());
            }
        }
        for e in &unique {
            bot.known.remove(e);
        }
        bot.admit(unique, &order);
        Ok(())
    })();
    let outcome = setup.map_err(Stop::Driver).and_then(|_| bot.run());
    match outcome {
        Ok(()) => Ok(bot.finish(started, true)),
        Err(Stop::Budget) => {
            let limit = config.max_triggers;
            Err(DiscoverError::BudgetExceeded {
                limit,
                partial: Box::new(bot.finish(started, false)),
            })
        }
        Err(Stop::Driver(reason)) => Err(DiscoverError::SessionLost {
            reason,
            partial: Box::new(bot.finish(started, false)),
        }),
    }
}
