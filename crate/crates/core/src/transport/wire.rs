//! Line protocol: one message per line, LF-terminated, UTF-8.
//!
//! A message is `KIND key=value key=value ...` with keys in a fixed order
//! per kind. Values are decimal integers, floats printed with 17 significant
//! digits (bit-exact round-trip), or lowercase tokens from the fixed
//! per-key vocabularies (`mode`, `policy`, `kind`). NaN and infinity are
//! never legal on the wire. See `docs/PROTOCOL.md` for byte-level examples.

use crate::error::WireError;
use crate::numeric::{fmt17, parse17};
use crate::worker::{RhoPolicy, SummaryPayload, TransmissionMode, WorkerSummary};

/// Statistic keys of a summary line, in wire order, per mode.
fn stat_keys(mode: TransmissionMode) -> &'static [&'static str] {
    match mode {
        TransmissionMode::FiveStat => &["r1_kn", "r2_kn", "r1_krho", "r2_krho", "r3_krho"],
        TransmissionMode::SixStat => {
            &["r1_kn", "r2_kn", "r1_krho", "r2_krho", "r3_krho", "threshold"]
        }
        TransmissionMode::ThreeStat => &["local_rho", "r1_kn", "r2_kn"],
        TransmissionMode::OneStat => &["local_gamma"],
    }
}

/// A summary as it travels: machine id, declared mode, and exactly the
/// budgeted statistics in wire order.
#[derive(Debug, Clone, PartialEq)]
pub struct WireSummary {
    pub machine_id: usize,
    pub mode: TransmissionMode,
    pub stats: Vec<f64>,
}

impl WireSummary {
    pub fn from_summary(summary: &WorkerSummary) -> Self {
        Self {
            machine_id: summary.machine_id,
            mode: summary.mode(),
            stats: summary.payload.scalars(),
        }
    }

    /// Rebuilds the worker-side summary; `k_n`, `k_rho` and `n_j` come from
    /// the session (they are configuration, not transmitted statistics).
    pub fn into_summary(self, k_n: usize, k_rho: usize, n_j: usize) -> WorkerSummary {
        let s = &self.stats;
        let payload = match self.mode {
            TransmissionMode::FiveStat => SummaryPayload::FiveStat {
                k_n,
                k_rho,
                r1_kn: s[0],
                r2_kn: s[1],
                r1_krho: s[2],
                r2_krho: s[3],
                r3_krho: s[4],
            },
            TransmissionMode::SixStat => SummaryPayload::SixStat {
                k_n,
                k_rho,
                r1_kn: s[0],
                r2_kn: s[1],
                r1_krho: s[2],
                r2_krho: s[3],
                r3_krho: s[4],
                threshold: s[5],
            },
            TransmissionMode::ThreeStat => SummaryPayload::ThreeStat {
                k_n,
                k_rho,
                local_rho: s[0],
                r1_kn: s[1],
                r2_kn: s[2],
            },
            TransmissionMode::OneStat => SummaryPayload::OneStat { k_n, k_rho, local_gamma: s[0] },
        };
        WorkerSummary { machine_id: self.machine_id, n_j, payload }
    }
}

/// Error kinds a worker may report instead of a summary.
pub const ERROR_KINDS: [&str; 5] = ["bounds", "degenerate", "domain", "protocol", "internal"];

/// The messages of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    /// Handshake. The coordinator sends `version` only; the worker replies
    /// with its shard size attached.
    Hello { version: u32, n: Option<u64> },
    /// Coordinator request: compute a summary under this configuration.
    Task {
        machine_id: usize,
        mode: TransmissionMode,
        k_n: usize,
        k_rho: usize,
        tau: f64,
        policy: RhoPolicy,
    },
    Summary(WireSummary),
    Error { machine_id: usize, kind: String },
    Bye,
}

fn push_float(out: &mut String, key: &str, value: f64) -> Result<(), WireError> {
    if !value.is_finite() {
        return Err(WireError::NonFinite(value));
    }
    out.push(' ');
    out.push_str(key);
    out.push('=');
    out.push_str(&fmt17(value));
    Ok(())
}

/// Canonical serialization of a message (no trailing newline).
pub fn encode(msg: &WireMessage) -> Result<String, WireError> {
    let mut out = String::new();
    match msg {
        WireMessage::Hello { version, n } => {
            out.push_str("HELLO");
            out.push_str(&format!(" version={version}"));
            if let Some(n) = n {
                out.push_str(&format!(" n={n}"));
            }
        }
        WireMessage::Task { machine_id, mode, k_n, k_rho, tau, policy } => {
            out.push_str("TASK");
            out.push_str(&format!(" machine_id={machine_id} mode={}", mode.name()));
            out.push_str(&format!(" kn={k_n} krho={k_rho}"));
            push_float(&mut out, "tau", *tau)?;
            out.push_str(&format!(" policy={}", policy.name()));
        }
        WireMessage::Summary(s) => {
            let keys = stat_keys(s.mode);
            if s.stats.len() != keys.len() {
                return Err(WireError::BudgetViolation {
                    mode: s.mode.name(),
                    expected: keys.len(),
                    got: s.stats.len(),
                });
            }
            out.push_str("SUMMARY");
            out.push_str(&format!(" machine_id={} mode={}", s.machine_id, s.mode.name()));
            for (key, value) in keys.iter().zip(&s.stats) {
                push_float(&mut out, key, *value)?;
            }
        }
        WireMessage::Error { machine_id, kind } => {
            out.push_str("ERROR");
            out.push_str(&format!(" machine_id={machine_id} kind={kind}"));
        }
        WireMessage::Bye => out.push_str("BYE"),
    }
    Ok(out)
}

/// Cursor over the `key=value` fields of one line, tracking byte offsets
/// for error reporting.
struct Fields<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Fields<'a> {
    fn new(line: &'a str, after_kind: usize) -> Self {
        Self { line, pos: after_kind }
    }

    fn malformed(&self, reason: impl Into<String>) -> WireError {
        WireError::Malformed { offset: self.pos, reason: reason.into() }
    }

    /// Consumes ` key=` and returns the raw value token.
    fn take(&mut self, key: &str) -> Result<&'a str, WireError> {
        let rest = &self.line[self.pos..];
        if rest.is_empty() {
            return Err(self.malformed(format!("missing field `{key}`")));
        }
        let rest = rest
            .strip_prefix(' ')
            .ok_or_else(|| self.malformed("expected single space between fields"))?;
        self.pos += 1;
        let token_end = rest.find(' ').unwrap_or(rest.len());
        let token = &rest[..token_end];
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| self.malformed(format!("expected `{key}=<value>`")))?;
        if k != key {
            return Err(self.malformed(format!("expected key `{key}`, got `{k}`")));
        }
        self.pos += token.len();
        Ok(v)
    }

    fn take_usize(&mut self, key: &str) -> Result<usize, WireError> {
        let v = self.take(key)?;
        v.parse::<usize>().map_err(|_| self.malformed(format!("`{key}` is not an integer: `{v}`")))
    }

    fn take_float(&mut self, key: &str) -> Result<f64, WireError> {
        let v = self.take(key)?;
        let x = parse17(v).map_err(|_| self.malformed(format!("`{key}` is not a float: `{v}`")))?;
        if !x.is_finite() {
            return Err(WireError::NonFinite(x));
        }
        Ok(x)
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.line.len() {
            return Err(self.malformed("trailing fields"));
        }
        Ok(())
    }

    fn at_end(&self) -> bool {
        self.pos == self.line.len()
    }
}

/// Strict parse of one line. Unknown kinds and keys, wrong field order,
/// non-finite floats and summary arity mismatches are all rejected.
pub fn decode(line: &str) -> Result<WireMessage, WireError> {
    let kind_end = line.find(' ').unwrap_or(line.len());
    let kind = &line[..kind_end];
    let mut fields = Fields::new(line, kind_end);
    match kind {
        "HELLO" => {
            let version = fields.take_usize("version")? as u32;
            let n = if fields.at_end() { None } else { Some(fields.take_usize("n")? as u64) };
            fields.finish()?;
            Ok(WireMessage::Hello { version, n })
        }
        "TASK" => {
            let machine_id = fields.take_usize("machine_id")?;
            let mode_token = fields.take("mode")?;
            let mode = TransmissionMode::by_name(mode_token)
                .ok_or_else(|| fields.malformed(format!("unknown mode `{mode_token}`")))?;
            let k_n = fields.take_usize("kn")?;
            let k_rho = fields.take_usize("krho")?;
            let tau = fields.take_float("tau")?;
            let policy_token = fields.take("policy")?;
            let policy = RhoPolicy::by_name(policy_token)
                .ok_or_else(|| fields.malformed(format!("unknown policy `{policy_token}`")))?;
            fields.finish()?;
            Ok(WireMessage::Task { machine_id, mode, k_n, k_rho, tau, policy })
        }
        "SUMMARY" => {
            let machine_id = fields.take_usize("machine_id")?;
            let mode_token = fields.take("mode")?;
            let mode = TransmissionMode::by_name(mode_token)
                .ok_or_else(|| fields.malformed(format!("unknown mode `{mode_token}`")))?;
            let keys = stat_keys(mode);
            let mut stats = Vec::with_capacity(keys.len());
            for key in keys {
                match fields.take_float(key) {
                    Ok(v) => stats.push(v),
                    Err(WireError::Malformed { .. }) if fields.at_end() => {
                        return Err(WireError::BudgetViolation {
                            mode: mode.name(),
                            expected: keys.len(),
                            got: stats.len(),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
            if !fields.at_end() {
                // count whatever extra fields follow for the arity report
                let extras = line[fields.pos..].split(' ').filter(|t| !t.is_empty()).count();
                return Err(WireError::BudgetViolation {
                    mode: mode.name(),
                    expected: keys.len(),
                    got: keys.len() + extras,
                });
            }
            Ok(WireMessage::Summary(WireSummary { machine_id, mode, stats }))
        }
        "ERROR" => {
            let machine_id = fields.take_usize("machine_id")?;
            let kind = fields.take("kind")?;
            if !ERROR_KINDS.contains(&kind) {
                return Err(fields.malformed(format!("unknown error kind `{kind}`")));
            }
            fields.finish()?;
            Ok(WireMessage::Error { machine_id, kind: kind.to_string() })
        }
        "BYE" => {
            fields.finish()?;
            Ok(WireMessage::Bye)
        }
        other => Err(WireError::Malformed {
            offset: 0,
            reason: format!("unknown message kind `{other}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bye_is_bare() {
        assert_eq!(encode(&WireMessage::Bye).unwrap(), "BYE");
        assert_eq!(decode("BYE").unwrap(), WireMessage::Bye);
        assert!(decode("BYE ").is_err());
    }

    #[test]
    fn hello_with_and_without_n() {
        let c = WireMessage::Hello { version: 1, n: None };
        assert_eq!(encode(&c).unwrap(), "HELLO version=1");
        let w = WireMessage::Hello { version: 1, n: Some(500) };
        assert_eq!(encode(&w).unwrap(), "HELLO version=1 n=500");
        assert_eq!(decode("HELLO version=1 n=500").unwrap(), w);
    }

    #[test]
    fn task_round_trip() {
        let task = WireMessage::Task {
            machine_id: 3,
            mode: TransmissionMode::FiveStat,
            k_n: 100,
            k_rho: 441,
            tau: 0.5,
            policy: RhoPolicy::Strict,
        };
        let line = encode(&task).unwrap();
        assert_eq!(
            line,
            "TASK machine_id=3 mode=five kn=100 krho=441 tau=5.0000000000000000e-1 policy=strict"
        );
        assert_eq!(decode(&line).unwrap(), task);
    }

    #[test]
    fn summary_arity_is_enforced() {
        let five = WireSummary {
            machine_id: 1,
            mode: TransmissionMode::FiveStat,
            stats: vec![1.0, 2.0, 1.1, 2.2, 6.6],
        };
        let line = encode(&WireMessage::Summary(five.clone())).unwrap();
        assert_eq!(line.matches("r1_kn=").count(), 1);
        assert_eq!(decode(&line).unwrap(), WireMessage::Summary(five.clone()));
        // six statistic fields on a five-stat line: budget violation
        let too_many = format!("{line} threshold=1.0000000000000000e0");
        assert!(matches!(
            decode(&too_many),
            Err(WireError::BudgetViolation { expected: 5, got: 6, .. })
        ));
        // truncation: budget violation on missing stats, malformed otherwise
        let truncated = line.rsplit_once(' ').unwrap().0;
        assert!(matches!(decode(truncated), Err(WireError::BudgetViolation { .. })));
        let mid_value = line.rfind('=').unwrap() + 1;
        assert!(decode(&line[..mid_value]).is_err());
        // encode side also refuses a wrong arity
        let broken = WireSummary { stats: vec![1.0], ..five };
        assert!(matches!(
            encode(&WireMessage::Summary(broken)),
            Err(WireError::BudgetViolation { .. })
        ));
    }

    #[test]
    fn non_finite_rejected_both_ways() {
        let msg = WireMessage::Summary(WireSummary {
            machine_id: 1,
            mode: TransmissionMode::OneStat,
            stats: vec![f64::NAN],
        });
        assert!(matches!(encode(&msg), Err(WireError::NonFinite(_))));
        assert!(matches!(
            decode("SUMMARY machine_id=1 mode=one local_gamma=inf"),
            Err(WireError::NonFinite(_))
        ));
    }

    #[test]
    fn strict_rejections() {
        assert!(decode("NOPE").is_err());
        assert!(decode("TASK machine_id=1").is_err());
        assert!(decode("SUMMARY machine_id=1 mode=seven local_gamma=1.0").is_err());
        assert!(decode("ERROR machine_id=2 kind=weird").is_err());
        // wrong key order is rejected
        assert!(decode("HELLO n=5 version=1").is_err());
        assert_eq!(
            decode("ERROR machine_id=2 kind=bounds").unwrap(),
            WireMessage::Error { machine_id: 2, kind: "bounds".into() }
        );
    }

    #[test]
    fn summary_survives_worker_round_trip() {
        use crate::distributions::Shard;
        use crate::worker::make_summary;
        let shard =
            Shard::new(7, (1..=60).map(|i| (i as f64).powf(1.3) + 0.17).collect()).unwrap();
        for mode in [
            TransmissionMode::FiveStat,
            TransmissionMode::SixStat,
            TransmissionMode::ThreeStat,
            TransmissionMode::OneStat,
        ] {
            let summary = make_summary(&shard, 10, 40, 0.5, mode, RhoPolicy::FallbackMinusOne).unwrap();
            let line = encode(&WireMessage::Summary(WireSummary::from_summary(&summary))).unwrap();
            match decode(&line).unwrap() {
                WireMessage::Summary(ws) => {
                    let back = ws.into_summary(10, 40, shard.len());
                    assert_eq!(back, summary, "mode {mode:?} not bit-identical over the wire");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
