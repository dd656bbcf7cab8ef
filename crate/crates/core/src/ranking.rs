//! Ranked retrieval results shared by every matching scheme.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStrategy {
    MaxMax,
    SumMax,
    SumMaxWeighted,
}

impl MatchStrategy {
    pub const ALL: [MatchStrategy; 3] = [Self::MaxMax, Self::SumMax, Self::SumMaxWeighted];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxMax => "max-max",
            Self::SumMax => "sum-max",
            Self::SumMaxWeighted => "sum-max-weighted",
        }
    }
}

impl fmt::Display for MatchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MatchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-max" | "mm" => Ok(Self::MaxMax),
            "sum-max" | "sm" => Ok(Self::SumMax),
            "sum-max-weighted" | "smw" => Ok(Self::SumMaxWeighted),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub map_id: String,
    pub score: f64,
}

/// One query ranked against a database.
#[derive(Clone, Debug, PartialEq)]
pub struct RankResult {
    pub query_id: String,
    pub entries: Vec<RankEntry>,
    pub strategy: Option<MatchStrategy>,
    /// Wall-clock seconds spent scoring.
    pub elapsed: f64,
    /// Number of pairwise box similarity evaluations performed (0 for direct matching).
    pub evaluations: u64,
}

/// Descending score, then ascending map id.
pub fn rank_order(a: &RankEntry, b: &RankEntry) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.map_id.cmp(&b.map_id))
}

impl RankResult {
    /// Sorts `entries` into rank order.
    pub fn new(
        query_id: impl Into<String>,
        mut entries: Vec<RankEntry>,
        strategy: Option<MatchStrategy>,
    ) -> Self {
        entries.sort_by(rank_order);
        Self {
            query_id: query_id.into(),
            entries,
            strategy,
            elapsed: 0.0,
            evaluations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `map_id`.
    pub fn rank_of(&self, map_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.map_id == map_id)
            .map(|i| i + 1)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.map_id.as_str()).collect()
    }

    /// Writes the `query_id,rank,map_id,score` CSV rows (with header).
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "query_id,rank,map_id,score")?;
        }
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", self.query_id, i + 1, e.map_id, e.score)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, score: f64) -> RankEntry {
        RankEntry {
            map_id: id.into(),
            score,
        }
    }

    #[test]
    fn ties_break_by_id() {
        let r = RankResult::new(
            "q",
            vec![entry("c", 1.0), entry("a", 1.0), entry("b", 2.0)],
            None,
        );
        assert_eq!(r.ids(), ["b", "a", "c"]);
        assert_eq!(r.rank_of("c"), Some(3));
        assert_eq!(r.rank_of("zz"), None);
    }

    #[test]
    fn csv_layout() {
        let r = RankResult::new("q1", vec![entry("g2", 0.5), entry("g1", 1.5)], None);
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "query_id,rank,map_id,score\nq1,1,g1,1.5\nq1,2,g2,0.5\n"
        );
    }

    #[test]
    fn strategy_names_parse() {
        for s in MatchStrategy::ALL {
            assert_eq!(s.name().parse::<MatchStrategy>().unwrap(), s);
        }
        assert!("nope".parse::<MatchStrategy>().is_err());
    }
}
