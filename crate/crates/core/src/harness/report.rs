//! Trial records, suite reports, and their JSON/CSV encodings.
//!
//! Log-space measurements are legitimately infinite (a zero shift has
//! `log_actual = -inf` and infinite slack), but JSON has no literal for
//! that, so every field that can be non-finite is encoded through helpers
//! that map infinities and NaN to the strings `"inf"`, `"-inf"`, `"nan"`
//! and back. CSV output prints floats with 17 significant digits, which
//! round-trips any 64-bit value.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::shift::{ShiftReport, IDENTITY_TOL};

/// Serde adapter for one possibly non-finite float.
pub mod json_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Tag(String),
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Tag(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a float encoding: {other:?}"))),
            },
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

/// Serde adapter for `Option<f64>` with the same non-finite encoding.
pub mod json_f64_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) => super::json_f64::serialize(x, s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<super::json_f64::Repr>::deserialize(d)?
            .map(super::json_f64::from_repr)
            .transpose()
    }
}

/// Serde adapter for string-keyed float maps with the non-finite encoding.
pub mod json_f64_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    struct Repr(f64);

    impl serde::Serialize for Repr {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::json_f64::serialize(&self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &Repr(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, super::json_f64::Repr>::deserialize(d)?
            .into_iter()
            .map(|(k, r)| Ok((k, super::json_f64::from_repr(r)?)))
            .collect()
    }
}

/// Everything measured in one trial. Fields that only apply to shift suites
/// are `None` elsewhere; `log_actual` is the suite's principal measurement
/// (log shift magnitude, worst gradient deviation, worst fact margin, or
/// negated minimum log-normalizer) and `slack_log` is its distance below
/// the governing bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default, with = "json_f64_opt")]
    pub shift_norm: Option<f64>,
    #[serde(with = "json_f64")]
    pub log_actual: f64,
    #[serde(default, with = "json_f64_opt")]
    pub log_actual_exp: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_exp: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_actual_alpha: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_alpha: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_actual_alpha_inv: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_alpha_inv: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_actual_db1: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_db1: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_db1_statement: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_actual_db2: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_db2: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_db2_statement: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_bound_db: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_certificate: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_alpha_t: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub log_alpha_next: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub split_identity_rel: Option<f64>,
    #[serde(default, with = "json_f64_opt")]
    pub defining_identity_rel: Option<f64>,
    #[serde(with = "json_f64")]
    pub slack_log: f64,
    pub satisfied: BTreeMap<String, bool>,
    pub wall_time: f64,
}

impl TrialRecord {
    /// A record with every optional field empty; suite runners fill in what
    /// applies.
    pub fn new(trial_index: u64, n: usize, d: usize, r: f64) -> Self {
        TrialRecord {
            trial_index,
            n,
            d,
            r,
            shift_norm: None,
            log_actual: f64::NEG_INFINITY,
            log_actual_exp: None,
            log_bound_exp: None,
            log_actual_alpha: None,
            log_bound_alpha: None,
            log_actual_alpha_inv: None,
            log_bound_alpha_inv: None,
            log_actual_db1: None,
            log_bound_db1: None,
            log_bound_db1_statement: None,
            log_actual_db2: None,
            log_bound_db2: None,
            log_bound_db2_statement: None,
            log_bound_db: None,
            log_certificate: None,
            log_alpha_t: None,
            log_alpha_next: None,
            split_identity_rel: None,
            defining_identity_rel: None,
            slack_log: f64::INFINITY,
            satisfied: BTreeMap::new(),
            wall_time: 0.0,
        }
    }

    /// Copies a pair's shift report into the record.
    pub fn fill_from_shift(&mut self, report: &ShiftReport) {
        self.shift_norm = Some(report.shift_norm);
        self.log_actual = report.log_actual;
        self.log_actual_exp = Some(report.log_actual_exp);
        self.log_bound_exp = Some(report.log_bound_exp);
        self.log_actual_alpha = Some(report.log_actual_alpha);
        self.log_bound_alpha = Some(report.log_bound_alpha);
        self.log_actual_alpha_inv = Some(report.log_actual_alpha_inv);
        self.log_bound_alpha_inv = Some(report.log_bound_alpha_inv);
        self.log_actual_db1 = Some(report.log_actual_db1);
        self.log_bound_db1 = Some(report.log_bound_db1);
        self.log_bound_db1_statement = Some(report.log_bound_db1_statement);
        self.log_actual_db2 = Some(report.log_actual_db2);
        self.log_bound_db2 = Some(report.log_bound_db2);
        self.log_bound_db2_statement = Some(report.log_bound_db2_statement);
        self.log_bound_db = Some(report.log_bound_db);
        self.log_certificate = report.log_certificate;
        self.log_alpha_t = Some(report.log_alpha_t);
        self.log_alpha_next = Some(report.log_alpha_next);
        self.split_identity_rel = Some(report.split_identity_rel);
        self.defining_identity_rel = Some(report.defining_identity_rel);
        self.slack_log = report.slack_log;
        self.satisfied = report.satisfied.clone();
    }

    /// Slack of one named check, when the record carries enough to compute
    /// it. A measured zero (log-actual of negative infinity) counts as
    /// infinite slack.
    pub fn check_slack(&self, key: &str) -> Option<f64> {
        let pair = |actual: Option<f64>, bound: Option<f64>| -> Option<f64> {
            let (a, b) = (actual?, bound?);
            Some(if a == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                b - a
            })
        };
        let identity = |rel: Option<f64>| -> Option<f64> {
            let r = rel?;
            Some(if r == 0.0 {
                f64::INFINITY
            } else {
                IDENTITY_TOL.ln() - r.ln()
            })
        };
        match key {
            "exp" => pair(self.log_actual_exp, self.log_bound_exp),
            "alpha" => pair(self.log_actual_alpha, self.log_bound_alpha),
            "alpha_inv" => pair(self.log_actual_alpha_inv, self.log_bound_alpha_inv),
            "db1" => pair(self.log_actual_db1, self.log_bound_db1),
            "db1_statement" => pair(self.log_actual_db1, self.log_bound_db1_statement),
            "db2" => pair(self.log_actual_db2, self.log_bound_db2),
            "db2_statement" => pair(self.log_actual_db2, self.log_bound_db2_statement),
            "db" => pair(Some(self.log_actual), self.log_bound_db),
            "certificate" => pair(Some(self.log_actual), self.log_certificate),
            "chain" => pair(self.log_bound_db, self.log_certificate),
            "split_identity" => identity(self.split_identity_rel),
            "defining_identity" => identity(self.defining_identity_rel),
            "beta_t" => pair(self.log_alpha_t.map(|v| -v), Some(self.r * self.r)),
            "beta_next" => pair(self.log_alpha_next.map(|v| -v), Some(self.r * self.r)),
            _ => Some(self.slack_log),
        }
    }
}

/// Checks whose outcome gates success. The `*_statement` variants of the
/// part bounds are measured and reported but are diagnostics, not gates.
pub fn is_gating_check(key: &str) -> bool {
    !key.ends_with("_statement")
}

/// Aggregates over a suite's records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Count of `satisfied = false` per check.
    pub violations: BTreeMap<String, u64>,
    /// Tightest observed slack per check.
    #[serde(with = "json_f64_map")]
    pub min_slack_log: BTreeMap<String, f64>,
    /// Median of the principal per-trial slack.
    #[serde(with = "json_f64")]
    pub median_slack_log: f64,
    /// Violations across gating checks only.
    pub total_violations: u64,
    /// Worst gradient deviation, gradient suite only.
    #[serde(default, with = "json_f64_opt")]
    pub max_rel_err: Option<f64>,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord], with_max_rel_err: bool) -> Summary {
        let mut violations: BTreeMap<String, u64> = BTreeMap::new();
        let mut min_slack: BTreeMap<String, f64> = BTreeMap::new();
        let mut slacks: Vec<f64> = Vec::with_capacity(records.len());
        let mut total = 0u64;
        let mut max_rel = f64::NEG_INFINITY;
        for rec in records {
            slacks.push(rec.slack_log);
            max_rel = max_rel.max(rec.log_actual.exp());
            for (key, ok) in &rec.satisfied {
                let slot = violations.entry(key.clone()).or_insert(0);
                if !ok {
                    *slot += 1;
                    if is_gating_check(key) {
                        total += 1;
                    }
                }
                if let Some(s) = rec.check_slack(key) {
                    min_slack
                        .entry(key.clone())
                        .and_modify(|m| *m = m.min(s))
                        .or_insert(s);
                }
            }
        }
        slacks.sort_by(f64::total_cmp);
        let median_slack_log = match slacks.len() {
            0 => f64::NAN,
            len if len % 2 == 1 => slacks[len / 2],
            len => 0.5 * (slacks[len / 2 - 1] + slacks[len / 2]),
        };
        Summary {
            violations,
            min_slack_log: min_slack,
            median_slack_log,
            total_violations: total,
            max_rel_err: if with_max_rel_err {
                Some(max_rel)
            } else {
                None
            },
        }
    }
}

/// One suite run: the configuration it used, every trial, and aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: super::SampleConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

impl SuiteReport {
    /// True when no gating check failed anywhere.
    pub fn is_clean(&self) -> bool {
        self.summary.total_violations == 0
    }

    /// Records that failed a gating check.
    pub fn violating_records(&self) -> Vec<&TrialRecord> {
        self.records
            .iter()
            .filter(|r| r.satisfied.iter().any(|(k, ok)| is_gating_check(k) && !ok))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SuiteReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes the records as CSV: fixed column set, one row per trial,
    /// floats at 17 significant digits, booleans as `true`/`false`, empty
    /// cells for fields a suite does not populate. The config echo and
    /// summary are JSON-only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut keys: Vec<&str> = Vec::new();
        for rec in &self.records {
            for key in rec.satisfied.keys() {
                if !keys.contains(&key.as_str()) {
                    keys.push(key);
                }
            }
        }
        keys.sort_unstable();

        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "trial_index",
            "n",
            "d",
            "R",
            "shift_norm",
            "log_actual",
            "log_actual_exp",
            "log_bound_exp",
            "log_actual_alpha",
            "log_bound_alpha",
            "log_actual_alpha_inv",
            "log_bound_alpha_inv",
            "log_actual_db1",
            "log_bound_db1",
            "log_bound_db1_statement",
            "log_actual_db2",
            "log_bound_db2",
            "log_bound_db2_statement",
            "log_bound_db",
            "log_certificate",
            "log_alpha_t",
            "log_alpha_next",
            "split_identity_rel",
            "defining_identity_rel",
            "slack_log",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for key in &keys {
            header.push(format!("satisfied.{key}"));
        }
        header.push("wall_time".into());
        w.write_record(&header)?;

        let f = |v: f64| format!("{v:.16e}");
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.trial_index.to_string(),
                r.n.to_string(),
                r.d.to_string(),
                f(r.r),
                opt(r.shift_norm),
                f(r.log_actual),
                opt(r.log_actual_exp),
                opt(r.log_bound_exp),
                opt(r.log_actual_alpha),
                opt(r.log_bound_alpha),
                opt(r.log_actual_alpha_inv),
                opt(r.log_bound_alpha_inv),
                opt(r.log_actual_db1),
                opt(r.log_bound_db1),
                opt(r.log_bound_db1_statement),
                opt(r.log_actual_db2),
                opt(r.log_bound_db2),
                opt(r.log_bound_db2_statement),
                opt(r.log_bound_db),
                opt(r.log_certificate),
                opt(r.log_alpha_t),
                opt(r.log_alpha_next),
                opt(r.split_identity_rel),
                opt(r.defining_identity_rel),
                f(r.slack_log),
            ];
            for key in &keys {
                row.push(match r.satisfied.get(*key) {
                    Some(b) => b.to_string(),
                    None => String::new(),
                });
            }
            row.push(format!("{:.9}", r.wall_time));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// A copy with wall-clock fields zeroed, for determinism comparisons.
    pub fn strip_wall_time(&self) -> SuiteReport {
        let mut copy = self.clone();
        for r in &mut copy.records {
            r.wall_time = 0.0;
        }
        copy
    }
}
