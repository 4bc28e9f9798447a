use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use attnweb_core::oracle;
use attnweb_core::session::{read_session, write_session};
use attnweb_core::synth::{RawWave, ScriptedBlink, Segment};
use attnweb_core::{encode_packet, DataRow, RecordBody, SessionRecord, SynthScenario, Track};
use attnweb_gateway::{Gateway, GatewayError, GatewayOptions, RunSummary};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn scenario(duration_ms: i64, mean: f64) -> SynthScenario {
    SynthScenario {
        seed: 3,
        segments: vec![Segment { duration_ms, mean, stddev: 10.0 }],
        blink_script: vec![],
        sample_period_ms: 1000,
        start_ms: 1_000_000,
        raw: None,
        scroll_script: vec![],
    }
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(value).unwrap()).unwrap();
    path
}

fn write_records(dir: &Path, name: &str, records: &[SessionRecord]) -> PathBuf {
    let path = dir.join(name);
    write_session(records, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn options(source: &str) -> GatewayOptions {
    let mut opts = GatewayOptions::new(source.parse().unwrap());
    opts.listen = "127.0.0.1:0".parse().unwrap();
    opts.virtual_clock = true;
    opts.exit_when_done = true;
    opts
}

async fn start(opts: GatewayOptions) -> (SocketAddr, JoinHandle<Result<RunSummary, GatewayError>>) {
    let gw = Gateway::bind(opts).await.unwrap();
    let addr = gw.local_addr();
    let handle = tokio::spawn(gw.run(async { tokio::time::sleep(Duration::from_secs(20)).await }));
    (addr, handle)
}

async fn connect(addr: SocketAddr) -> Ws {
    connect_async(format!("ws://{addr}/eeg")).await.unwrap().0
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::text(v.to_string())).await.unwrap();
}

async fn recv(ws: &mut Ws) -> Option<Value> {
    loop {
        match tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("gateway went quiet")? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

/// Everything received until the gateway closes the connection.
async fn transcript(ws: &mut Ws) -> Vec<Value> {
    let mut out = Vec::new();
    while let Some(v) = recv(ws).await {
        out.push(v);
    }
    out
}

async fn subscribe(ws: &mut Ws, tracks: &[&str], freq: Option<f64>, events: bool) -> Value {
    let mut msg = json!({"type": "subscribe", "tracks": tracks, "events": events});
    if let Some(f) = freq {
        msg["frequencyHz"] = json!(f);
    }
    send(ws, msg).await;
    recv(ws).await.unwrap()
}

fn data_of(msgs: &[Value], track_id: &Value) -> Vec<(i64, f64)> {
    msgs.iter()
        .filter(|m| m["type"] == "data" && &m["trackId"] == track_id)
        .map(|m| (m["t"].as_i64().unwrap(), m["value"].as_f64().unwrap()))
        .collect()
}

#[tokio::test]
async fn two_subscribers_get_the_same_replay() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_json(dir.path(), "s.json", &scenario(10_000, 50.0));
    let records = attnweb_core::synthesize(&serde_json::from_slice(&std::fs::read(&sc).unwrap()).unwrap()).unwrap();
    let session = write_records(dir.path(), "in.session", &records);

    let mut opts = options(&format!("replay:{}@1000", session.display()));
    opts.wait_for_subscribers = 2;
    let (addr, gw) = start(opts).await;

    let mut a = connect(addr).await;
    let mut b = connect(addr).await;
    let ca = subscribe(&mut a, &["attention"], Some(1.0), true).await;
    let cb = subscribe(&mut b, &["attention"], None, true).await;
    assert_eq!(ca["type"], "streamCreated");
    assert_eq!(ca["tracks"][0]["label"], "attention");
    assert_ne!(ca["streamId"], cb["streamId"]);

    let (ta, tb) = tokio::join!(transcript(&mut a), transcript(&mut b));
    let da = data_of(&ta, &ca["tracks"][0]["id"]);
    let db = data_of(&tb, &cb["tracks"][0]["id"]);
    assert!((9..=11).contains(&da.len()), "{}", da.len());
    assert!(da.windows(2).all(|w| w[0].0 < w[1].0));
    assert_eq!(da, db);
    assert_eq!(ta.last().unwrap()["type"], "sourceEnded");

    let summary = gw.await.unwrap().unwrap();
    assert_eq!(summary.samples, 10);
    assert!(summary.source_finished);
}

#[tokio::test]
async fn raw_block_means_match_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = scenario(3000, 50.0);
    sc.raw = Some(RawWave { amplitude: 300.0, frequency_hz: 10.0, noise_stddev: 25.0 });
    let path = write_json(dir.path(), "raw.json", &sc);
    let mut opts = options(&format!("synth:{}@1000", path.display()));
    opts.wait_for_subscribers = 1;
    let (addr, gw) = start(opts).await;

    let mut ws = connect(addr).await;
    let created = subscribe(&mut ws, &["raw"], Some(64.0), false).await;
    assert_eq!(created["tracks"][0]["frequencyHz"], 64.0);
    let got: Vec<f64> =
        data_of(&transcript(&mut ws).await, &created["tracks"][0]["id"]).into_iter().map(|d| d.1).collect();
    assert_eq!(got.len(), 64 * 3);

    let raw: Vec<i32> = attnweb_core::synthesize(&sc)
        .unwrap()
        .iter()
        .filter_map(|r| r.as_sample())
        .filter(|s| s.track == Track::Raw)
        .map(|s| s.value)
        .collect();
    assert_eq!(got, oracle::block_means(&raw, 8));
    gw.await.unwrap().unwrap();
}

#[tokio::test]
async fn clamping_errors_and_unsubscribe() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "s.json", &scenario(2000, 50.0));
    let mut opts = options(&format!("synth:{}", path.display()));
    opts.exit_when_done = false;
    opts.wait_for_subscribers = 99;
    let gw = Gateway::bind(opts).await.unwrap();
    let addr = gw.local_addr();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(gw.run(async {
        let _ = stop_rx.await;
    }));

    let mut ws = connect(addr).await;
    let created = subscribe(&mut ws, &["attention"], Some(5.0), true).await;
    assert_eq!(created["tracks"][0]["frequencyHz"], 1.0);
    assert_eq!(created["warnings"].as_array().unwrap().len(), 1);

    let err = subscribe(&mut ws, &["attention", "alpha"], None, true).await;
    assert_eq!(err["type"], "error");
    assert_eq!(err["code"], "unknownTrack");
    assert_eq!(err["validTracks"], json!(["attention", "meditation", "blink", "raw", "signal_quality"]));

    let err = subscribe(&mut ws, &[], None, true).await;
    assert_eq!(err["code"], "badRequest");

    send(&mut ws, json!({"type": "unsubscribe", "streamId": created["streamId"]})).await;
    assert_eq!(recv(&mut ws).await.unwrap()["type"], "ack");

    ws.send(Message::text("{not json")).await.unwrap();
    assert_eq!(recv(&mut ws).await.unwrap()["code"], "badRequest");

    stop_tx.send(()).unwrap();
    let summary = handle.await.unwrap().unwrap();
    assert!(!summary.source_finished);
    assert_eq!(summary.samples, 0);
}

#[tokio::test]
async fn scroll_is_acked_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "s.json", &scenario(3000, 50.0));
    let out = dir.path().join("out.session");
    let mut opts = options(&format!("synth:{}@1000", path.display()));
    opts.record = Some(out.clone());
    opts.wait_for_subscribers = 1;
    let (addr, gw) = start(opts).await;

    let mut ws = connect(addr).await;
    send(&mut ws, json!({"type": "scroll", "page": "wiki/Main_Page", "offset": 0, "viewport": 800, "content": 1600}))
        .await;
    let ack = recv(&mut ws).await.unwrap();
    assert_eq!(ack["type"], "ack");
    assert_eq!(ack["t"], 1_000_000);
    send(&mut ws, json!({"type": "scroll", "page": "wiki/Main_Page", "offset": 0, "viewport": 0, "content": 1600}))
        .await;
    assert_eq!(recv(&mut ws).await.unwrap()["code"], "invalidScroll");
    send(&mut ws, json!({"type": "scroll", "page": "wiki/Main_Page", "offset": 0})).await;
    assert_eq!(recv(&mut ws).await.unwrap()["code"], "badRequest");

    subscribe(&mut ws, &["attention"], None, true).await;
    transcript(&mut ws).await;
    let summary = gw.await.unwrap().unwrap();
    assert_eq!(summary.scrolls, 1);

    let (records, diags) = read_session(std::io::BufReader::new(std::fs::File::open(&out).unwrap()));
    assert!(diags.is_empty());
    assert_eq!(summary.records, records.len());
    assert_eq!(records.iter().filter(|r| matches!(r.body, RecordBody::Scroll { .. })).count(), 1);
    assert_eq!(records.iter().filter(|r| matches!(r.body, RecordBody::Attention { .. })).count(), 3);
    assert!(records.windows(2).all(|w| w[0].t <= w[1].t));
}

fn blink_scenario() -> SynthScenario {
    let mut sc = scenario(3000, 50.0);
    sc.blink_script = [(0, 5), (300, 40), (600, 8), (900, 45)]
        .iter()
        .map(|&(t_ms, strength)| ScriptedBlink { t_ms, strength })
        .collect();
    sc
}

#[tokio::test]
async fn events_follow_their_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "b.json", &blink_scenario());
    let mut opts = options(&format!("synth:{}@1000", path.display()));
    opts.wait_for_subscribers = 1;
    let (addr, gw) = start(opts).await;
    let mut ws = connect(addr).await;
    let created = subscribe(&mut ws, &["blink"], None, true).await;
    let msgs = transcript(&mut ws).await;
    let kinds: Vec<String> = msgs
        .iter()
        .filter_map(|m| match m["type"].as_str().unwrap() {
            "event" => Some(m["event"].as_str().unwrap().to_string()),
            "data" => Some(format!("data@{}", m["t"])),
            _ => None,
        })
        .collect();
    let t = |ms: i64| format!("data@{}", 1_000_000 + ms);
    assert_eq!(
        kinds,
        vec![
            t(0),
            t(300),
            "deliberateBlink".into(),
            t(600),
            t(900),
            "deliberateBlink".into(),
            "doubleBlink".into(),
            "sustainedHighEnter".into()
        ]
    );
    assert_eq!(data_of(&msgs, &created["tracks"][0]["id"]).len(), 4);
    assert_eq!(gw.await.unwrap().unwrap().events, 4);
}

#[tokio::test]
async fn disabled_engine_sends_no_events() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "b.json", &blink_scenario());
    let mut opts = options(&format!("synth:{}@1000", path.display()));
    opts.wait_for_subscribers = 1;
    opts.engine = None;
    let (addr, gw) = start(opts).await;
    let mut ws = connect(addr).await;
    subscribe(&mut ws, &["blink", "attention"], None, true).await;
    let msgs = transcript(&mut ws).await;
    assert!(msgs.iter().all(|m| m["type"] != "event"));
    assert_eq!(msgs.iter().filter(|m| m["type"] == "data").count(), 7);
    assert_eq!(gw.await.unwrap().unwrap().events, 0);
}

#[tokio::test]
async fn device_bytes_become_samples() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = vec![0x00, 0xAA];
    for v in [40u8, 45, 0, 50] {
        bytes.extend(encode_packet(&[DataRow::signal_quality(0), DataRow::attention(v)]).unwrap());
    }
    bytes.extend(encode_packet(&[DataRow::raw(-7)]).unwrap());
    bytes.extend([0xAA, 0xAA, 0x10]);
    let path = dir.path().join("capture.bin");
    std::fs::write(&path, bytes).unwrap();

    let mut opts = options(&format!("device:{}", path.display()));
    opts.wait_for_subscribers = 1;
    let (addr, gw) = start(opts).await;
    let mut ws = connect(addr).await;
    let created = subscribe(&mut ws, &["attention", "raw"], None, false).await;
    let msgs = transcript(&mut ws).await;
    let att: Vec<f64> = data_of(&msgs, &created["tracks"][0]["id"]).into_iter().map(|d| d.1).collect();
    assert_eq!(att, vec![40.0, 45.0, 50.0]);
    assert_eq!(data_of(&msgs, &created["tracks"][1]["id"]), vec![(0, -7.0)]);
    assert_eq!(gw.await.unwrap().unwrap().samples, 8);
}

#[tokio::test]
async fn busy_port_and_missing_files_fail_at_bind() {
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "s.json", &scenario(1000, 50.0));
    let mut opts = options(&format!("synth:{}", path.display()));
    opts.listen = holder.local_addr().unwrap();
    assert!(matches!(Gateway::bind(opts).await, Err(GatewayError::Bind { .. })));

    let opts = options("replay:/definitely/not/here.session");
    assert!(matches!(Gateway::bind(opts).await, Err(GatewayError::Source(_))));

    let bad = write_json(dir.path(), "bad.json", &json!({"seed": 1, "segments": [{"duration_ms": 0, "mean": 5}]}));
    let opts = options(&format!("synth:{}", bad.display()));
    assert!(matches!(Gateway::bind(opts).await, Err(GatewayError::Source(_))));

    let mut opts = options(&format!("synth:{}", path.display()));
    opts.engine.as_mut().unwrap().attention_threshold = 0;
    assert!(matches!(Gateway::bind(opts).await, Err(GatewayError::Config(_))));
}

async fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let status = buf[9..12].parse().unwrap();
    let body = buf.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[tokio::test]
async fn serves_ui_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>demo</h1>").unwrap();
    let path = write_json(dir.path(), "s.json", &scenario(5000, 50.0));
    let mut opts = options(&format!("synth:{}@1000", path.display()));
    opts.exit_when_done = false;
    opts.ui_dir = Some(ui);
    opts.buckets = 4;
    opts.wait_for_subscribers = 1;
    let gw = Gateway::bind(opts).await.unwrap();
    let addr = gw.local_addr();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(gw.run(async {
        let _ = stop_rx.await;
    }));

    let (status, body) = http_get(addr, "/index.html").await;
    assert_eq!(status, 200);
    assert!(body.contains("demo"));

    let mut ws = connect(addr).await;
    subscribe(&mut ws, &["attention"], None, false).await;
    loop {
        if recv(&mut ws).await.unwrap()["type"] == "sourceEnded" {
            break;
        }
    }
    send(&mut ws, json!({"type": "scroll", "page": "wiki/Main_Page", "offset": 0, "viewport": 800, "content": 1600}))
        .await;
    recv(&mut ws).await.unwrap();

    let (status, body) = http_get(addr, "/profile/wiki/Main_Page").await;
    assert_eq!(status, 200, "{body}");
    let profile: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(profile["page_id"], "wiki/Main_Page");
    assert_eq!(profile["buckets"].as_array().unwrap().len(), 4);
    assert_eq!(profile["buckets"][2]["count"], 1);
    let (status, _) = http_get(addr, "/profile/nowhere").await;
    assert_eq!(status, 404);

    stop_tx.send(()).unwrap();
    handle.await.unwrap().unwrap();
}

#[tokio::test]
async fn adding_a_subscriber_does_not_change_anothers_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = scenario(20_000, 40.0);
    sc.blink_script = blink_scenario().blink_script;
    let path = write_json(dir.path(), "s.json", &sc);

    let mut runs = Vec::new();
    for subscribers in [1, 3] {
        let mut opts = options(&format!("synth:{}@1000", path.display()));
        opts.wait_for_subscribers = subscribers;
        let (addr, gw) = start(opts).await;
        let mut conns = Vec::new();
        for _ in 0..subscribers {
            let mut ws = connect(addr).await;
            let created = subscribe(&mut ws, &["attention", "blink"], Some(0.5), true).await;
            conns.push((ws, created));
        }
        let (mut ws, created) = conns.remove(0);
        let msgs = transcript(&mut ws).await;
        for (mut other, _) in conns {
            transcript(&mut other).await;
        }
        gw.await.unwrap().unwrap();
        let strip = |m: &Value| {
            let mut m = m.clone();
            if let Some(o) = m.as_object_mut() {
                o.remove("streamId");
                let tid = o.remove("trackId");
                if let Some(tid) = tid {
                    let idx = created["tracks"].as_array().unwrap().iter().position(|t| t["id"] == tid).unwrap();
                    o.insert("track".into(), json!(idx));
                }
            }
            m
        };
        runs.push(msgs.iter().filter(|m| m["type"] != "streamCreated").map(strip).collect::<Vec<_>>());
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].len() > 10);
}
