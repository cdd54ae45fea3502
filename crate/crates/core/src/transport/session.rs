//! Session logic: a worker serving its shard, and the coordinator running
//! one estimate over a set of worker connections.
//!
//! A session is a single round trip per worker: HELLO exchange, one TASK,
//! one SUMMARY (or ERROR), then BYE. The coordinator aggregates only after
//! every worker has replied, re-sorted by machine id, so the result does not
//! depend on reply order. Serialization is lossless (17-significant-digit
//! decimals), so a cross-process estimate is bit-identical to the in-process
//! pipeline on the same shards.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use crate::central::{estimate, EstimateReport, EstimatorConfig};
use crate::distributions::Shard;
use crate::error::{TransportError, WorkerError};
use crate::transport::wire::{decode, encode, WireMessage, WireSummary};
use crate::worker::make_summary;

pub const PROTOCOL_VERSION: u32 = 1;

/// Everything the coordinator needs for one estimate over live workers.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub config: EstimatorConfig,
    pub p_n: Option<f64>,
    /// Continue with the remaining workers when one reports an error.
    pub allow_partial: bool,
}

fn worker_error_kind(err: &WorkerError) -> &'static str {
    match err {
        WorkerError::KOutOfRange { .. } | WorkerError::KOrder { .. } => "bounds",
        WorkerError::DegenerateT | WorkerError::RhoDegenerate { .. } => "degenerate",
        WorkerError::NonPositiveValue(_)
        | WorkerError::NegativeTau(_)
        | WorkerError::InvalidAlpha(_) => "domain",
    }
}

fn send<W: Write>(
    writer: &mut W,
    msg: &WireMessage,
    transcript: &mut Option<&mut Vec<String>>,
) -> Result<(), TransportError> {
    let line = encode(msg)?;
    writer.write_all(line.as_bytes())?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    if let Some(t) = transcript {
        t.push(line);
    }
    Ok(())
}

fn recv<R: BufRead>(
    reader: &mut R,
    transcript: &mut Option<&mut Vec<String>>,
) -> Result<Option<WireMessage>, TransportError> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Ok(None); // connection closed
    }
    let line = line.strip_suffix('\n').unwrap_or(&line);
    let msg = decode(line)?;
    if let Some(t) = transcript {
        t.push(line.to_string());
    }
    Ok(Some(msg))
}

/// Serves one shard over a byte stream until BYE or end of stream.
///
/// Replies to HELLO with the protocol version and the shard size, and to
/// each TASK with exactly one SUMMARY computed by [`make_summary`] — nothing
/// derived from more than the budgeted statistics is ever written.
/// Estimation failures are reported as ERROR messages and the session
/// continues.
pub fn worker_serve<R: BufRead, W: Write>(
    shard: &Shard,
    mut reader: R,
    mut writer: W,
) -> Result<(), TransportError> {
    let mut no_transcript: Option<&mut Vec<String>> = None;
    loop {
        let msg = match recv(&mut reader, &mut no_transcript) {
            Ok(Some(msg)) => msg,
            Ok(None) => return Ok(()), // coordinator hung up
            Err(e) => return Err(e),
        };
        match msg {
            WireMessage::Hello { .. } => {
                let reply =
                    WireMessage::Hello { version: PROTOCOL_VERSION, n: Some(shard.len() as u64) };
                send(&mut writer, &reply, &mut no_transcript)?;
            }
            WireMessage::Task { machine_id, mode, k_n, k_rho, tau, policy } => {
                let reply = match make_summary(shard, k_n, k_rho, tau, mode, policy) {
                    Ok(summary) => {
                        let mut ws = WireSummary::from_summary(&summary);
                        // the coordinator assigns machine ids per session
                        ws.machine_id = machine_id;
                        WireMessage::Summary(ws)
                    }
                    Err(err) => WireMessage::Error {
                        machine_id,
                        kind: worker_error_kind(&err).to_string(),
                    },
                };
                send(&mut writer, &reply, &mut no_transcript)?;
            }
            WireMessage::Bye => return Ok(()),
            other => {
                return Err(TransportError::UnexpectedMessage {
                    expected: "HELLO, TASK or BYE",
                    got: encode(&other).unwrap_or_else(|_| format!("{other:?}")),
                })
            }
        }
    }
}

/// Runs one estimate over connected workers: broadcast the task, collect one
/// summary per worker, aggregate centrally.
///
/// Worker `i` is assigned machine id `i + 1`. Without `allow_partial`, a
/// single worker error fails the session; with it, failed workers are
/// dropped and noted in the report diagnostics. When a transcript buffer is
/// supplied, every line sent or received is appended in order.
pub fn coordinate<R: BufRead, W: Write>(
    workers: &mut [(R, W)],
    session: &SessionConfig,
    mut transcript: Option<&mut Vec<String>>,
) -> Result<EstimateReport, TransportError> {
    let cfg = &session.config;
    let mut summaries = Vec::with_capacity(workers.len());
    let mut partial_notes = Vec::new();

    for (idx, (reader, writer)) in workers.iter_mut().enumerate() {
        let machine_id = idx + 1;
        send(writer, &WireMessage::Hello { version: PROTOCOL_VERSION, n: None }, &mut transcript)?;
        let n_j = match recv(reader, &mut transcript)? {
            Some(WireMessage::Hello { n: Some(n), .. }) => n as usize,
            Some(other) => {
                return Err(TransportError::UnexpectedMessage {
                    expected: "HELLO with shard size",
                    got: encode(&other).unwrap_or_else(|_| format!("{other:?}")),
                })
            }
            None => return Err(TransportError::ConnectionLost(machine_id)),
        };
        let task = WireMessage::Task {
            machine_id,
            mode: cfg.mode,
            k_n: cfg.k_n,
            k_rho: cfg.k_rho,
            tau: cfg.tau,
            policy: cfg.rho_policy,
        };
        send(writer, &task, &mut transcript)?;
        match recv(reader, &mut transcript)? {
            Some(WireMessage::Summary(ws)) => {
                if ws.machine_id != machine_id || ws.mode != cfg.mode {
                    return Err(TransportError::UnexpectedMessage {
                        expected: "summary matching the task",
                        got: encode(&WireMessage::Summary(ws))
                            .unwrap_or_else(|_| "summary".into()),
                    });
                }
                summaries.push(ws.into_summary(cfg.k_n, cfg.k_rho, n_j));
            }
            Some(WireMessage::Error { machine_id: mid, kind }) => {
                if session.allow_partial {
                    partial_notes.push(format!("machine {mid} dropped: {kind}"));
                } else {
                    return Err(TransportError::WorkerReported { machine_id: mid, kind });
                }
            }
            Some(other) => {
                return Err(TransportError::UnexpectedMessage {
                    expected: "SUMMARY or ERROR",
                    got: encode(&other).unwrap_or_else(|_| format!("{other:?}")),
                })
            }
            None => return Err(TransportError::ConnectionLost(machine_id)),
        }
    }

    for (_, writer) in workers.iter_mut() {
        send(writer, &WireMessage::Bye, &mut transcript)?;
    }

    if summaries.is_empty() {
        return Err(TransportError::NothingToAggregate);
    }
    // aggregate() re-sorts by machine id, so reply order cannot matter
    summaries.sort_by_key(|s| s.machine_id);
    let mut report = estimate(&summaries, cfg, session.p_n)?;
    let mut diagnostics = partial_notes;
    diagnostics.append(&mut report.diagnostics);
    report.diagnostics = diagnostics;
    Ok(report)
}

/// Accepts one connection on `listener` and serves `shard` on it.
pub fn serve_worker_tcp(shard: &Shard, listener: TcpListener) -> Result<(), TransportError> {
    let (stream, _addr) = listener.accept()?;
    let reader = BufReader::new(stream.try_clone()?);
    worker_serve(shard, reader, stream)
}

/// Connects to worker endpoints (`host:port`) and returns buffered duplex
/// handles in endpoint order.
pub fn connect_workers(
    endpoints: &[String],
) -> Result<Vec<(BufReader<TcpStream>, TcpStream)>, TransportError> {
    endpoints
        .iter()
        .map(|ep| {
            let stream = TcpStream::connect(ep)?;
            let reader = BufReader::new(stream.try_clone()?);
            Ok((reader, stream))
        })
        .collect()
}
