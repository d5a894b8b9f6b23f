//! Click-log ingestion, cleaning, and time-window splitting.
//!
//! Event logs are UTF-8, one event per line, tab separated:
//! `user<TAB>item<TAB>timestamp[<TAB>dwell]`. Lines starting with `#` and
//! blank lines are ignored.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// One click with dense user/item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickEvent {
    pub user: u32,
    pub item: u32,
    pub ts: i64,
    pub dwell: Option<i64>,
    /// Position in the filtered input; used to reproduce the input order on write.
    pub seq: u64,
}

/// Mapping between opaque external ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMaps {
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
}

impl IdMaps {
    pub fn new(users: Vec<String>, items: Vec<String>) -> Result<Self> {
        let mut maps = IdMaps::default();
        for u in users {
            if maps.intern_user(&u) as usize != maps.users.len() - 1 {
                return invalid(format!("duplicate user id {u}"));
            }
        }
        for i in items {
            if maps.intern_item(&i) as usize != maps.items.len() - 1 {
                return invalid(format!("duplicate item id {i}"));
            }
        }
        Ok(maps)
    }

    fn intern_user(&mut self, id: &str) -> u32 {
        if let Some(&ix) = self.user_index.get(id) {
            return ix;
        }
        let ix = self.users.len() as u32;
        self.users.push(id.to_string());
        self.user_index.insert(id.to_string(), ix);
        ix
    }

    fn intern_item(&mut self, id: &str) -> u32 {
        if let Some(&ix) = self.item_index.get(id) {
            return ix;
        }
        let ix = self.items.len() as u32;
        self.items.push(id.to_string());
        self.item_index.insert(id.to_string(), ix);
        ix
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_id(&self, ix: u32) -> &str {
        &self.users[ix as usize]
    }

    pub fn item_id(&self, ix: u32) -> &str {
        &self.items[ix as usize]
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<u32> {
        self.item_index.get(id).copied()
    }
}

/// Per-user, time-ordered click streams sharing one set of index maps.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    ids: Arc<IdMaps>,
    per_user: Vec<Vec<ClickEvent>>,
}

impl EventStream {
    /// Builds a stream from events already carrying dense indices. Each user's
    /// events are stably sorted by timestamp.
    pub fn from_events(ids: Arc<IdMaps>, events: impl IntoIterator<Item = ClickEvent>) -> Result<Self> {
        let mut per_user: Vec<Vec<ClickEvent>> = vec![Vec::new(); ids.num_users()];
        for ev in events {
            if ev.user as usize >= ids.num_users() || ev.item as usize >= ids.num_items() {
                return invalid(format!("event index out of range: user {} item {}", ev.user, ev.item));
            }
            if ev.ts < 0 || ev.dwell.is_some_and(|d| d < 0) {
                return invalid("negative timestamp or dwell");
            }
            per_user[ev.user as usize].push(ev);
        }
        for evs in per_user.iter_mut() {
            evs.sort_by_key(|e| (e.ts, e.seq));
        }
        Ok(EventStream { ids, per_user })
    }

    pub fn ids(&self) -> &Arc<IdMaps> {
        &self.ids
    }

    pub fn num_users(&self) -> usize {
        self.ids.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.ids.num_items()
    }

    /// Total number of events.
    pub fn len(&self) -> usize {
        self.per_user.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_user.iter().all(Vec::is_empty)
    }

    pub fn user_events(&self, user: u32) -> &[ClickEvent] {
        &self.per_user[user as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClickEvent> {
        self.per_user.iter().flatten()
    }

    /// Events of `user` with timestamp strictly before `ts`.
    pub fn events_before(&self, user: u32, ts: i64) -> &[ClickEvent] {
        let evs = &self.per_user[user as usize];
        let end = evs.partition_point(|e| e.ts < ts);
        &evs[..end]
    }

    /// The most recent (at most) `window` events of `user` strictly before `ts`.
    pub fn last_before(&self, user: u32, ts: i64, window: usize) -> &[ClickEvent] {
        let prior = self.events_before(user, ts);
        &prior[prior.len().saturating_sub(window)..]
    }

    /// Sorted, deduplicated items the user interacted with.
    pub fn user_items(&self, user: u32) -> Vec<u32> {
        let mut items: Vec<u32> = self.per_user[user as usize].iter().map(|e| e.item).collect();
        items.sort_unstable();
        items.dedup();
        items
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        let mut it = self.iter().map(|e| e.ts);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }

    /// View restricted to `[start, end)`; shares index maps with `self`.
    pub fn window(&self, start: i64, end: i64) -> EventStream {
        let per_user = self
            .per_user
            .iter()
            .map(|evs| {
                let lo = evs.partition_point(|e| e.ts < start);
                let hi = evs.partition_point(|e| e.ts < end);
                evs[lo..hi.max(lo)].to_vec()
            })
            .collect();
        EventStream {
            ids: Arc::clone(&self.ids),
            per_user,
        }
    }

    /// All events in original input order.
    pub fn events_in_input_order(&self) -> Vec<ClickEvent> {
        let mut all: Vec<ClickEvent> = self.iter().copied().collect();
        all.sort_by_key(|e| e.seq);
        all
    }

    /// Per-item click counts.
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_items()];
        for e in self.iter() {
            counts[e.item as usize] += 1;
        }
        counts
    }

    /// Writes the stream in event-log format, preserving input order.
    pub fn write_log<W: Write>(&self, w: &mut W) -> Result<()> {
        for e in self.events_in_input_order() {
            let user = self.ids.user_id(e.user);
            let item = self.ids.item_id(e.item);
            match e.dwell {
                Some(d) => writeln!(w, "{user}\t{item}\t{}\t{d}", e.ts)?,
                None => writeln!(w, "{user}\t{item}\t{}", e.ts)?,
            }
        }
        Ok(())
    }
}

/// A parsed log line with opaque ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub user: String,
    pub item: String,
    pub ts: i64,
    pub dwell: Option<i64>,
}

pub fn parse_log<R: BufRead>(reader: R) -> Result<Vec<RawEvent>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: lineno,
                reason: "empty user or item id".into(),
            });
        }
        let parse_int = |s: &str, what: &str| -> Result<i64> {
            let v: i64 = s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("invalid {what} {s:?}"),
            })?;
            if v < 0 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("negative {what} {v}"),
                });
            }
            Ok(v)
        };
        let ts = parse_int(fields[2], "timestamp")?;
        let dwell = match fields.get(3) {
            Some(d) => Some(parse_int(d, "dwell")?),
            None => None,
        };
        out.push(RawEvent {
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            ts,
            dwell,
        });
    }
    Ok(out)
}

/// Drops short-dwell clicks, keeps the `top_k_users` most active users
/// (ties by first appearance), and assigns dense indices in order of first
/// appearance among the retained events.
pub fn build_stream(raw: Vec<RawEvent>, min_dwell: i64, top_k_users: usize) -> Result<EventStream> {
    let kept: Vec<RawEvent> = raw
        .into_iter()
        .filter(|e| e.dwell.is_none_or(|d| d >= min_dwell))
        .collect();

    let mut first_seen: HashMap<&str, (usize, u64)> = HashMap::new();
    for (pos, e) in kept.iter().enumerate() {
        first_seen.entry(e.user.as_str()).or_insert((pos, 0)).1 += 1;
    }
    let mut ranked: Vec<(&str, usize, u64)> = first_seen.iter().map(|(u, &(p, c))| (*u, p, c)).collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.1.cmp(&b.1)));
    ranked.truncate(top_k_users);
    let retained: std::collections::HashSet<&str> = ranked.iter().map(|r| r.0).collect();

    let mut ids = IdMaps::default();
    let mut events = Vec::new();
    for e in kept.iter().filter(|e| retained.contains(e.user.as_str())) {
        let user = ids.intern_user(&e.user);
        let item = ids.intern_item(&e.item);
        events.push(ClickEvent {
            user,
            item,
            ts: e.ts,
            dwell: e.dwell,
            seq: events.len() as u64,
        });
    }
    if events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    EventStream::from_events(Arc::new(ids), events)
}

pub fn ingest(path: impl AsRef<Path>, min_dwell: i64, top_k_users: usize) -> Result<EventStream> {
    let file = crate::error::open_file(path)?;
    build_stream(parse_log(BufReader::new(file))?, min_dwell, top_k_users)
}

/// Window boundaries; each window is half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub history_end: i64,
    pub train_end: i64,
    pub valid_end: i64,
    pub test_end: i64,
    pub min_dwell: i64,
    pub top_k_users: usize,
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.history_end < self.train_end
            && self.train_end < self.valid_end
            && self.valid_end < self.test_end)
        {
            return invalid("split boundaries must satisfy history_end < train_end < valid_end < test_end");
        }
        if self.min_dwell < 0 {
            return invalid("min_dwell must be non-negative");
        }
        Ok(())
    }

    /// Boundaries at the given fractions of the stream's time span; the test
    /// window extends past the last event.
    pub fn proportional(stream: &EventStream, history: f64, train: f64, valid: f64) -> Result<Self> {
        let (lo, hi) = stream.time_range().ok_or(Error::EmptyCorpus)?;
        if !(history > 0.0 && train > 0.0 && valid > 0.0 && history + train + valid < 1.0) {
            return invalid("split fractions must be positive and sum to less than 1");
        }
        let span = (hi - lo) as f64;
        let at = |f: f64| lo + (span * f).round() as i64;
        let cfg = SplitConfig {
            history_end: at(history),
            train_end: at(history + train),
            valid_end: at(history + train + valid),
            test_end: hi + 1,
            min_dwell: 0,
            top_k_users: usize::MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The four windows of a split. Events at or after `test_end` fall outside
/// every window and are only counted.
#[derive(Debug, Clone)]
pub struct Split {
    pub history: EventStream,
    pub train: EventStream,
    pub valid: EventStream,
    pub test: EventStream,
    pub beyond_test_end: usize,
}

pub fn split(stream: &EventStream, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    let history = stream.window(i64::MIN, cfg.history_end);
    let train = stream.window(cfg.history_end, cfg.train_end);
    let valid = stream.window(cfg.train_end, cfg.valid_end);
    let test = stream.window(cfg.valid_end, cfg.test_end);
    let beyond_test_end = stream.window(cfg.test_end, i64::MAX).len();
    Ok(Split {
        history,
        train,
        valid,
        test,
        beyond_test_end,
    })
}
