use std::collections::HashMap;

use crate::corpus::EventStream;
use crate::error::Result;

/// Read access to the event log cut strictly before a query timestamp.
/// Every scorer sees user data only through this type.
#[derive(Debug, Clone)]
pub struct CausalContext<'a> {
    stream: &'a EventStream,
    window: usize,
    first_read: HashMap<(u32, u32), i64>,
}

impl<'a> CausalContext<'a> {
    /// `window` caps [`recent_items`](Self::recent_items).
    pub fn new(stream: &'a EventStream, window: usize) -> Self {
        let mut first_read = HashMap::with_capacity(stream.len());
        for e in stream.iter() {
            first_read
                .entry((e.user, e.item))
                .and_modify(|t: &mut i64| *t = (*t).min(e.ts))
                .or_insert(e.ts);
        }
        CausalContext {
            stream,
            window,
            first_read,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn num_users(&self) -> usize {
        self.stream.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.stream.num_items()
    }

    /// Up to `window` most recent items of `user` strictly before `ts`, oldest first.
    pub fn recent_items(&self, user: u32, ts: i64) -> Vec<u32> {
        self.stream.last_before(user, ts, self.window).iter().map(|e| e.item).collect()
    }

    /// Whether `user` read `item` strictly before `ts`.
    pub fn read_before(&self, user: u32, item: u32, ts: i64) -> bool {
        self.first_read.get(&(user, item)).is_some_and(|&t| t < ts)
    }
}

/// Anything that can score candidate items for a (user, time) query.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// One score per item in `items`; higher ranks first.
    fn score(&self, ctx: &CausalContext<'_>, user: u32, ts: i64, items: &[u32]) -> Result<Vec<f64>>;
}
