use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::ActionLabels;

/// Identifies the moment a piece of advice refers to: `episode:step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub episode: u64,
    pub step: u64,
}

impl StateKey {
    pub fn new(episode: u64, step: u64) -> Self {
        StateKey { episode, step }
    }

    /// How many steps `self` lags behind `current` within the same episode;
    /// `None` for other episodes or keys from the future.
    pub fn age(&self, current: &StateKey) -> Option<u64> {
        (self.episode == current.episode && self.step <= current.step)
            .then(|| current.step - self.step)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.episode, self.step)
    }
}

impl FromStr for StateKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (e, st) = s
            .split_once(':')
            .ok_or_else(|| format!("state key {s:?} is not episode:step"))?;
        let parse = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| format!("state key {s:?} is not episode:step"))
        };
        Ok(StateKey::new(parse(e)?, parse(st)?))
    }
}

/// Labels submitted by a live human, waiting for the trainer.
///
/// Cloning shares the same inbox. Each stored entry is handed out at most
/// once; a later submission for the same key replaces the earlier one.
#[derive(Debug, Clone, Default)]
pub struct HumanInbox {
    inner: Arc<(Mutex<HashMap<StateKey, ActionLabels>>, Condvar)>,
}

impl HumanInbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit(&self, key: StateKey, labels: ActionLabels) {
        let (lock, cvar) = &*self.inner;
        lock.lock().unwrap().insert(key, labels);
        cvar.notify_all();
    }

    /// Removes and returns the labels for `key`.
    pub fn take(&self, key: &StateKey) -> Option<ActionLabels> {
        self.inner.0.lock().unwrap().remove(key)
    }

    /// Like [`take`](Self::take) but blocks up to `timeout` for a submission.
    pub fn wait_take(&self, key: &StateKey, timeout: Duration) -> Option<ActionLabels> {
        let (lock, cvar) = &*self.inner;
        let deadline = Instant::now() + timeout;
        let mut map = lock.lock().unwrap();
        loop {
            if let Some(labels) = map.remove(key) {
                return Some(labels);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            map = cvar.wait_timeout(map, deadline - now).unwrap().0;
        }
    }

    /// Drops every entry older than `window` steps relative to `current`.
    pub fn purge_stale(&self, current: &StateKey, window: u64) {
        self.inner
            .0
            .lock()
            .unwrap()
            .retain(|k, _| k.age(current).is_some_and(|a| a <= window) || k > current);
    }

    pub fn len(&self) -> usize {
        self.inner.0.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(i: usize) -> ActionLabels {
        let mut good = [false; 4];
        good[i] = true;
        ActionLabels { good }
    }

    #[test]
    fn single_consumption() {
        let inbox = HumanInbox::new();
        let k = StateKey::new(3, 4);
        assert_eq!(inbox.take(&k), None);
        inbox.submit(k, labels(1));
        assert_eq!(inbox.take(&k), Some(labels(1)));
        assert_eq!(inbox.take(&k), None);
    }

    #[test]
    fn last_writer_wins() {
        let inbox = HumanInbox::new();
        let k = StateKey::new(0, 0);
        inbox.submit(k, labels(0));
        inbox.submit(k, labels(2));
        assert_eq!(inbox.take(&k), Some(labels(2)));
        assert!(inbox.is_empty());
    }

    #[test]
    fn wait_take_sees_later_submission() {
        let inbox = HumanInbox::new();
        let k = StateKey::new(1, 1);
        let writer = inbox.clone();
        let h = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(20));
            writer.submit(k, labels(3));
        });
        assert_eq!(inbox.wait_take(&k, Duration::from_secs(5)), Some(labels(3)));
        h.join().unwrap();
        assert_eq!(inbox.wait_take(&k, Duration::from_millis(10)), None);
    }

    #[test]
    fn state_keys_parse_and_age() {
        let k: StateKey = "12:7".parse().unwrap();
        assert_eq!(k, StateKey::new(12, 7));
        assert_eq!(k.to_string(), "12:7");
        assert!("12".parse::<StateKey>().is_err());
        assert!("a:1".parse::<StateKey>().is_err());
        assert_eq!(k.age(&StateKey::new(12, 9)), Some(2));
        assert_eq!(k.age(&StateKey::new(13, 9)), None);
        assert_eq!(k.age(&StateKey::new(12, 6)), None);
    }

    #[test]
    fn purge_keeps_recent_entries() {
        let inbox = HumanInbox::new();
        inbox.submit(StateKey::new(0, 1), labels(0));
        inbox.submit(StateKey::new(0, 8), labels(0));
        inbox.submit(StateKey::new(0, 10), labels(0));
        inbox.purge_stale(&StateKey::new(0, 10), 2);
        assert_eq!(inbox.len(), 2);
        assert!(inbox.take(&StateKey::new(0, 1)).is_none());
        assert!(inbox.take(&StateKey::new(0, 8)).is_some());
    }
}
