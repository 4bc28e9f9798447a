//! Bounded per-connection outbox with drop-oldest overflow.

use std::collections::VecDeque;
use std::sync::Mutex;

use tokio::sync::Notify;

use crate::protocol::ServerMessage;

pub const DEFAULT_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    /// Sample data; may be shed under load.
    Data(String),
    /// Everything else is never shed.
    Control(String),
}

impl Outgoing {
    fn text(self) -> String {
        match self {
            Outgoing::Data(s) | Outgoing::Control(s) => s,
        }
    }
}

#[derive(Debug, Default)]
struct Inner {
    items: VecDeque<Outgoing>,
    dropped: u64,
    closed: bool,
}

/// When full, the oldest data message is discarded to make room. The number
/// discarded is reported to the consumer as a `warning` message before the
/// next delivery.
#[derive(Debug)]
pub struct Outbox {
    inner: Mutex<Inner>,
    notify: Notify,
    capacity: usize,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Outbox { inner: Mutex::new(Inner::default()), notify: Notify::new(), capacity: capacity.max(1) }
    }

    pub fn push(&self, item: Outgoing) {
        let mut q = self.inner.lock().unwrap();
        if q.closed {
            return;
        }
        if q.items.len() >= self.capacity {
            match q.items.iter().position(|o| matches!(o, Outgoing::Data(_))) {
                Some(i) => {
                    q.items.remove(i);
                    q.dropped += 1;
                }
                None if matches!(item, Outgoing::Data(_)) => {
                    q.dropped += 1;
                    return;
                }
                None => {}
            }
        }
        q.items.push_back(item);
        drop(q);
        self.notify.notify_one();
    }

    /// Next message to send, or `None` once closed and drained.
    pub async fn pop(&self) -> Option<String> {
        loop {
            if let Some(text) = self.try_pop() {
                return Some(text);
            }
            if self.inner.lock().unwrap().closed {
                return None;
            }
            self.notify.notified().await;
        }
    }

    pub fn try_pop(&self) -> Option<String> {
        let mut q = self.inner.lock().unwrap();
        if q.dropped > 0 {
            let n = std::mem::take(&mut q.dropped);
            let warning = ServerMessage::Warning {
                message: format!("slow consumer: {n} data messages dropped"),
                dropped: Some(n),
            };
            return Some(warning.to_json());
        }
        q.items.pop_front().map(Outgoing::text)
    }

    /// Stops accepting messages; queued ones are still delivered.
    pub fn close(&self) {
        self.inner.lock().unwrap().closed = true;
        self.notify.notify_one();
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_oldest_data_and_reports() {
        let q = Outbox::new(3);
        q.push(Outgoing::Control("c".into()));
        for i in 0..5 {
            q.push(Outgoing::Data(format!("d{i}")));
        }
        let w = q.try_pop().unwrap();
        assert!(w.contains("\"dropped\":3"), "{w}");
        let rest: Vec<_> = std::iter::from_fn(|| q.try_pop()).collect();
        assert_eq!(rest, vec!["c", "d3", "d4"]);
    }

    #[test]
    fn control_messages_are_kept() {
        let q = Outbox::new(2);
        q.push(Outgoing::Control("a".into()));
        q.push(Outgoing::Control("b".into()));
        q.push(Outgoing::Data("d".into()));
        q.push(Outgoing::Control("c".into()));
        assert!(q.try_pop().unwrap().contains("\"dropped\":1"));
        assert_eq!(std::iter::from_fn(|| q.try_pop()).collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[tokio::test]
    async fn close_drains_then_ends() {
        let q = std::sync::Arc::new(Outbox::new(8));
        let reader = {
            let q = q.clone();
            tokio::spawn(async move {
                let mut got = Vec::new();
                while let Some(m) = q.pop().await {
                    got.push(m);
                }
                got
            })
        };
        q.push(Outgoing::Data("x".into()));
        q.push(Outgoing::Data("y".into()));
        q.close();
        q.push(Outgoing::Data("late".into()));
        assert_eq!(reader.await.unwrap(), vec!["x", "y"]);
    }
}
