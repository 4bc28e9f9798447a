//! `run`: the gateway as a foreground service.

use std::net::SocketAddr;

use attnweb_gateway::{Gateway, GatewayError, GatewayOptions, RunSummary, SourceSpec, DEFAULT_LISTEN};

use crate::args::RunArgs;
use crate::config::FileConfig;
use crate::CliError;

pub fn parse_source(s: &str) -> Result<SourceSpec, CliError> {
    s.parse().map_err(|e: attnweb_gateway::SourceError| CliError::Usage(e.to_string()))
}

/// Flags over file over defaults.
pub fn options(args: &RunArgs, file: &FileConfig) -> Result<GatewayOptions, CliError> {
    let source = args
        .source
        .as_deref()
        .or(file.source.as_deref())
        .ok_or_else(|| CliError::Usage("run needs --source or `source` in the config".into()))?;
    let mut opts = GatewayOptions::new(parse_source(source)?);
    opts.listen = match args.listen.or(file.listen) {
        Some(a) => a,
        None => DEFAULT_LISTEN.parse::<SocketAddr>().expect("valid default address"),
    };
    opts.record = args.record.clone().or_else(|| file.record.clone());
    opts.ui_dir = args.ui_dir.clone().or_else(|| file.ui_dir.clone());
    if let Some(b) = args.buckets.or(file.buckets) {
        if b == 0 {
            return Err(CliError::Usage("buckets must be at least 1".into()));
        }
        opts.buckets = b;
    }
    if let Some(s) = args.max_skew_ms.or(file.max_skew_ms) {
        if s < 0 {
            return Err(CliError::Usage("max_skew_ms must not be negative".into()));
        }
        opts.max_skew_ms = s;
    }
    if let Some(q) = args.queue_capacity.or(file.queue_capacity) {
        if q == 0 {
            return Err(CliError::Usage("queue_capacity must be at least 1".into()));
        }
        opts.queue_capacity = q;
    }
    opts.engine = file.engine.overlay(&args.engine.section()).resolve()?;
    opts.virtual_clock = args.virtual_clock;
    opts.restamp = args.restamp;
    opts.exit_when_done = args.exit_when_done;
    opts.wait_for_subscribers = args.wait_for_subscribers;
    Ok(opts)
}

fn classify(e: GatewayError) -> CliError {
    match e {
        GatewayError::Config(_) | GatewayError::Buckets => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Binds, serves until Ctrl-C (or the source ends with `exit_when_done`)
/// and flushes the session file.
pub fn serve(opts: GatewayOptions) -> Result<RunSummary, CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start runtime: {e}")))?;
    rt.block_on(async move {
        let gateway = Gateway::bind(opts).await.map_err(classify)?;
        tracing::info!(addr = %gateway.local_addr(), "listening");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        gateway.run(shutdown).await.map_err(classify)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineSection;

    #[test]
    fn file_fills_in_missing_flags() {
        let file = FileConfig {
            source: Some("synth:a.scenario".into()),
            buckets: Some(8),
            engine: EngineSection { attention_threshold: Some(40), ..Default::default() },
            ..Default::default()
        };
        let args = RunArgs { buckets: Some(12), ..Default::default() };
        let opts = options(&args, &file).unwrap();
        assert_eq!(opts.buckets, 12);
        assert_eq!(opts.engine.unwrap().attention_threshold, 40);
        assert_eq!(opts.listen.to_string(), DEFAULT_LISTEN);
    }

    #[test]
    fn source_is_required_and_validated() {
        let err = options(&RunArgs::default(), &FileConfig::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        let bad = RunArgs { source: Some("replay:x@-1".into()), ..Default::default() };
        assert!(matches!(options(&bad, &FileConfig::default()), Err(CliError::Usage(_))));
    }
}
