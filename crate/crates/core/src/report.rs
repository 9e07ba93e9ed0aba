//! Run reports and the merged summary table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::protocols::{CmcCurve, Eer, RankList, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Identification,
    Verification,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Identification => "identification",
            Protocol::Verification => "verification",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identification" => Ok(Protocol::Identification),
            "verification" => Ok(Protocol::Verification),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub writers: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub genuine: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub impostor: Option<usize>,
}

/// One protocol run at one enrolment size and seed.
///
/// `run_config` and `extraction_config` carry whatever the caller resolved
/// so a report can be reproduced on its own. Nothing time-dependent is
/// recorded, so identical runs serialise identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub protocol: Protocol,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub feature_tag: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cmc: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    pub counts: Counts,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    #[serde(default)]
    pub run_config: serde_json::Value,
    #[serde(default)]
    pub extraction_config: serde_json::Value,
}

impl Report {
    pub fn identification(
        n: usize,
        seed: u64,
        feature_tag: String,
        lists: &[RankList],
        cmc: &CmcCurve,
    ) -> Self {
        let mut writers: Vec<&str> = lists
            .iter()
            .flat_map(|l| l.identities.iter().map(String::as_str))
            .collect();
        writers.sort_unstable();
        writers.dedup();
        Report {
            protocol: Protocol::Identification,
            n,
            seed,
            feature_tag,
            cmc: Some(cmc.top_m.clone()),
            eer: None,
            threshold: None,
            counts: Counts {
                writers: writers.len(),
                probes: Some(lists.len()),
                ..Counts::default()
            },
            notes: BTreeMap::new(),
            run_config: serde_json::Value::Null,
            extraction_config: serde_json::Value::Null,
        }
    }

    pub fn verification(
        seed: u64,
        writers: usize,
        blocks: usize,
        scores: &ScoreSet,
        eer: Eer,
    ) -> Self {
        Report {
            protocol: Protocol::Verification,
            n: scores.n,
            seed,
            feature_tag: scores.feature_tag.clone(),
            cmc: None,
            eer: Some(eer.eer),
            threshold: Some(eer.threshold),
            counts: Counts {
                writers,
                blocks: Some(blocks),
                genuine: Some(scores.genuine.len()),
                impostor: Some(scores.impostor.len()),
                ..Counts::default()
            },
            notes: BTreeMap::new(),
            run_config: serde_json::Value::Null,
            extraction_config: serde_json::Value::Null,
        }
    }

    pub fn top(&self, m: usize) -> Option<f64> {
        let cmc = self.cmc.as_ref()?;
        cmc.get(m.checked_sub(1)?).or(cmc.last()).copied()
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Grouping label for the summary table, e.g. "f1+f2/digitwise".
    fn variant(&self) -> String {
        match self.run_config.get("mode").and_then(|m| m.as_str()) {
            Some(mode) if self.feature_tag != "embedding" => format!("{}/{mode}", self.feature_tag),
            _ => self.feature_tag.clone(),
        }
    }
}

/// Averages reports per (protocol, variant, N) over seeds and renders CSV:
/// `protocol,variant,N,runs,top1,top5,top10,eer`.
pub fn summary_csv(reports: &[Report]) -> String {
    #[derive(Default)]
    struct Acc {
        runs: usize,
        top: [f64; 3],
        eer: f64,
        eer_runs: usize,
    }
    let mut groups: BTreeMap<(Protocol, String, usize), Acc> = BTreeMap::new();
    for r in reports {
        let acc = groups.entry((r.protocol, r.variant(), r.n)).or_default();
        acc.runs += 1;
        for (slot, m) in acc.top.iter_mut().zip([1, 5, 10]) {
            *slot += r.top(m).unwrap_or(0.0);
        }
        if let Some(e) = r.eer {
            acc.eer += e;
            acc.eer_runs += 1;
        }
    }
    let mut out = String::from("protocol,variant,N,runs,top1,top5,top10,eer\n");
    for ((protocol, variant, n), acc) in groups {
        let runs = acc.runs as f64;
        let (tops, eer) = match protocol {
            Protocol::Identification => (
                acc.top
                    .iter()
                    .map(|t| format!("{:.6}", t / runs))
                    .collect::<Vec<_>>()
                    .join(","),
                String::new(),
            ),
            Protocol::Verification => (
                ",,".to_string(),
                format!("{:.6}", acc.eer / acc.eer_runs.max(1) as f64),
            ),
        };
        out.push_str(&format!(
            "{protocol},{variant},{n},{},{tops},{eer}\n",
            acc.runs
        ));
    }
    out
}
