//! Subscription registry and fan-out from the single source to every
//! connection.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use attnweb_core::{ControlEvent, Sample, Track};
use tokio::sync::watch;

use crate::downsample::Downsampler;
use crate::protocol::{ErrorCode, ServerMessage, TrackDescriptor};
use crate::queue::{Outbox, Outgoing};

pub type ConnId = u64;

#[derive(Debug)]
struct GrantedTrack {
    id: String,
    track: Track,
    ds: Downsampler,
}

#[derive(Debug)]
struct Stream {
    id: String,
    events: bool,
    tracks: Vec<GrantedTrack>,
}

#[derive(Debug)]
struct Conn {
    outbox: Arc<Outbox>,
    streams: Vec<Stream>,
}

impl Conn {
    fn wants_events(&self) -> bool {
        self.streams.iter().any(|s| s.events)
    }
}

#[derive(Debug)]
pub struct Hub {
    conns: Mutex<BTreeMap<ConnId, Conn>>,
    next_id: AtomicU64,
    capacity: usize,
    streams: watch::Sender<usize>,
}

impl Hub {
    pub fn new(queue_capacity: usize) -> Self {
        Hub {
            conns: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            capacity: queue_capacity,
            streams: watch::Sender::new(0),
        }
    }

    fn fresh(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    pub fn connect(&self) -> (ConnId, Arc<Outbox>) {
        let id = self.fresh();
        let outbox = Arc::new(Outbox::new(self.capacity));
        self.conns.lock().unwrap().insert(id, Conn { outbox: outbox.clone(), streams: Vec::new() });
        (id, outbox)
    }

    pub fn disconnect(&self, conn: ConnId) {
        let mut conns = self.conns.lock().unwrap();
        if let Some(c) = conns.remove(&conn) {
            c.outbox.close();
        }
        self.publish_count(&conns);
    }

    fn publish_count(&self, conns: &BTreeMap<ConnId, Conn>) {
        let n = conns.values().map(|c| c.streams.len()).sum();
        self.streams.send_replace(n);
    }

    /// Number of live streams across all connections.
    pub fn stream_count(&self) -> watch::Receiver<usize> {
        self.streams.subscribe()
    }

    /// Grants every requested track or none. The reply is queued on the
    /// connection before any data of the new stream, and also returned.
    pub fn handle_subscribe(
        &self,
        conn: ConnId,
        tracks: &[String],
        frequency_hz: Option<f64>,
        events: bool,
    ) -> ServerMessage {
        let mut conns = self.conns.lock().unwrap();
        let Some(c) = conns.get_mut(&conn) else {
            return ServerMessage::error(ErrorCode::BadRequest, "connection is closed");
        };
        let reply = match self.build_stream(tracks, frequency_hz, events) {
            Ok((stream, reply)) => {
                c.streams.push(stream);
                reply
            }
            Err(e) => e,
        };
        c.outbox.push(Outgoing::Control(reply.to_json()));
        self.publish_count(&conns);
        reply
    }

    fn build_stream(
        &self,
        labels: &[String],
        frequency_hz: Option<f64>,
        events: bool,
    ) -> Result<(Stream, ServerMessage), ServerMessage> {
        if labels.is_empty() {
            return Err(ServerMessage::error(ErrorCode::BadRequest, "at least one track is required"));
        }
        let mut parsed = Vec::new();
        for label in labels {
            let track = label.parse::<Track>().map_err(|e| ServerMessage::Error {
                code: ErrorCode::UnknownTrack,
                message: e.to_string(),
                valid_tracks: Some(Track::ALL.iter().map(|t| t.label().to_string()).collect()),
            })?;
            if !parsed.contains(&track) {
                parsed.push(track);
            }
        }

        let stream_id = format!("stream-{}", self.fresh());
        let mut granted = Vec::new();
        let mut descriptors = Vec::new();
        let mut warnings = Vec::new();
        for track in parsed {
            let (ds, grant) = Downsampler::new(track, frequency_hz)
                .map_err(|e| ServerMessage::error(ErrorCode::BadFrequency, e.to_string()))?;
            if grant.clamped {
                warnings.push(format!(
                    "{track}: requested {} Hz exceeds the native rate, granted {} Hz",
                    frequency_hz.unwrap_or_default(),
                    grant.frequency_hz
                ));
            }
            let id = format!("track-{}", self.fresh());
            descriptors.push(TrackDescriptor {
                id: id.clone(),
                label: track.label().into(),
                frequency_hz: grant.frequency_hz,
            });
            granted.push(GrantedTrack { id, track, ds });
        }
        let reply =
            ServerMessage::StreamCreated { stream_id: stream_id.clone(), tracks: descriptors, events, warnings };
        Ok((Stream { id: stream_id, events, tracks: granted }, reply))
    }

    pub fn unsubscribe(&self, conn: ConnId, stream_id: &str) -> ServerMessage {
        let mut conns = self.conns.lock().unwrap();
        let Some(c) = conns.get_mut(&conn) else {
            return ServerMessage::error(ErrorCode::BadRequest, "connection is closed");
        };
        let reply = match c.streams.iter().position(|s| s.id == stream_id) {
            Some(i) => {
                c.streams.remove(i);
                ServerMessage::Ack { t: None }
            }
            None => {
                ServerMessage::error(ErrorCode::UnknownStream, format!("no stream `{stream_id}` on this connection"))
            }
        };
        c.outbox.push(Outgoing::Control(reply.to_json()));
        self.publish_count(&conns);
        reply
    }

    /// Queues a reply on one connection.
    pub fn send(&self, conn: ConnId, msg: &ServerMessage) {
        if let Some(c) = self.conns.lock().unwrap().get(&conn) {
            c.outbox.push(Outgoing::Control(msg.to_json()));
        }
    }

    /// Fans one sample out to every stream carrying its track.
    pub fn deliver(&self, sample: &Sample) {
        let mut conns = self.conns.lock().unwrap();
        for c in conns.values_mut() {
            for s in &mut c.streams {
                for g in s.tracks.iter_mut().filter(|g| g.track == sample.track) {
                    if let Some((t, value)) = g.ds.push(sample) {
                        let msg = ServerMessage::Data { stream_id: s.id.clone(), track_id: g.id.clone(), t, value };
                        c.outbox.push(Outgoing::Data(msg.to_json()));
                    }
                }
            }
        }
    }

    /// Sends an event once to each connection that asked for events.
    pub fn broadcast_event(&self, event: &ControlEvent) {
        let text = ServerMessage::Event(*event).to_json();
        for c in self.conns.lock().unwrap().values().filter(|c| c.wants_events()) {
            c.outbox.push(Outgoing::Control(text.clone()));
        }
    }

    pub fn broadcast(&self, msg: &ServerMessage) {
        let text = msg.to_json();
        for c in self.conns.lock().unwrap().values() {
            c.outbox.push(Outgoing::Control(text.clone()));
        }
    }

    /// Closes every outbox; writers finish after draining.
    pub fn close_all(&self) {
        for c in self.conns.lock().unwrap().values() {
            c.outbox.close();
        }
    }

    /// True once no connection has undelivered messages.
    pub fn drained(&self) -> bool {
        self.conns.lock().unwrap().values().all(|c| c.outbox.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use attnweb_core::ControlEventKind;

    fn drain(o: &Outbox) -> Vec<serde_json::Value> {
        std::iter::from_fn(|| o.try_pop()).map(|s| serde_json::from_str(&s).unwrap()).collect()
    }

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn subscribe_shapes() {
        let hub = Hub::new(16);
        let (c, out) = hub.connect();
        let reply = hub.handle_subscribe(c, &labels(&["attention"]), Some(1.0), true);
        let ServerMessage::StreamCreated { tracks, warnings, .. } = reply else { panic!("{reply:?}") };
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].label, "attention");
        assert!(warnings.is_empty());

        let reply = hub.handle_subscribe(c, &labels(&["attention", "blink"]), None, true);
        let ServerMessage::StreamCreated { tracks, .. } = reply else { panic!() };
        assert_eq!(tracks.len(), 2);
        assert_ne!(tracks[0].id, tracks[1].id);
        assert_eq!(drain(&out).len(), 2);
        assert_eq!(*hub.stream_count().borrow(), 2);
    }

    #[test]
    fn over_native_is_clamped_with_warning() {
        let hub = Hub::new(16);
        let (c, _) = hub.connect();
        let ServerMessage::StreamCreated { tracks, warnings, .. } =
            hub.handle_subscribe(c, &labels(&["attention"]), Some(5.0), true)
        else {
            panic!()
        };
        assert_eq!(tracks[0].frequency_hz, 1.0);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn unknown_track_lists_valid_labels() {
        let hub = Hub::new(16);
        let (c, out) = hub.connect();
        let reply = hub.handle_subscribe(c, &labels(&["attention", "gamma"]), None, true);
        let ServerMessage::Error { code, valid_tracks, .. } = reply else { panic!() };
        assert_eq!(code, ErrorCode::UnknownTrack);
        assert_eq!(valid_tracks.unwrap().len(), 5);
        assert_eq!(*hub.stream_count().borrow(), 0);
        hub.deliver(&Sample::attention(0, 50));
        assert_eq!(drain(&out).len(), 1);
    }

    #[test]
    fn fan_out_is_identical_per_track() {
        let hub = Hub::new(16);
        let (a, oa) = hub.connect();
        let (b, ob) = hub.connect();
        hub.handle_subscribe(a, &labels(&["attention"]), None, true);
        hub.handle_subscribe(b, &labels(&["attention", "blink"]), None, false);
        hub.deliver(&Sample::attention(1000, 42));
        hub.deliver(&Sample::blink(1100, 9));
        hub.broadcast_event(&ControlEvent { t_ms: 1100, kind: ControlEventKind::DoubleBlink { gap_ms: 300 } });
        let ma = drain(&oa);
        let mb = drain(&ob);
        assert_eq!(ma.len(), 3);
        assert_eq!(mb.len(), 3);
        assert_eq!((&ma[1]["t"], &ma[1]["value"]), (&mb[1]["t"], &mb[1]["value"]));
        assert_eq!(ma[2]["event"], "doubleBlink");
        assert_eq!(mb[2]["type"], "data");
    }

    #[test]
    fn unsubscribe_stops_delivery() {
        let hub = Hub::new(16);
        let (c, out) = hub.connect();
        let ServerMessage::StreamCreated { stream_id, .. } =
            hub.handle_subscribe(c, &labels(&["attention"]), None, true)
        else {
            panic!()
        };
        assert!(matches!(hub.unsubscribe(c, &stream_id), ServerMessage::Ack { .. }));
        assert!(matches!(hub.unsubscribe(c, &stream_id), ServerMessage::Error { code: ErrorCode::UnknownStream, .. }));
        hub.deliver(&Sample::attention(0, 50));
        assert_eq!(drain(&out).len(), 3);
    }
}
