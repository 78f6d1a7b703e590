//! The 25 model-selection tools and the selection rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::{Criterion, Direction};
use crate::error::{Error, Result};
use crate::marglik::{Method, TuningKind};
use crate::model::ModelId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToolId {
    Marginal { method: Method, tuning: Option<TuningKind> },
    Criterion(Criterion),
}

impl ToolId {
    /// GD-MAP and GD-IL under each of the nine tuning densities, the
    /// harmonic mean, two DICs, three WAICs and D∞.
    pub fn all() -> Vec<ToolId> {
        let mut out = Vec::with_capacity(25);
        for method in [Method::GdMap, Method::GdIl] {
            for t in TuningKind::STUDY {
                out.push(ToolId::Marginal { method, tuning: Some(t) });
            }
        }
        out.push(ToolId::Marginal { method: Method::Hm, tuning: None });
        out.extend(Criterion::ALL.map(ToolId::Criterion));
        out
    }

    pub fn label(&self) -> String {
        match self {
            ToolId::Marginal { method, tuning: Some(t) } => format!("{method}:{t}"),
            ToolId::Marginal { method, tuning: None } => method.to_string(),
            ToolId::Criterion(c) => c.to_string(),
        }
    }

    /// Marginal likelihoods prefer larger values, criteria smaller ones.
    pub fn direction(&self) -> Direction {
        match self {
            ToolId::Marginal { .. } => Direction::Larger,
            ToolId::Criterion(_) => Direction::Smaller,
        }
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ToolId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((m, t)) = s.split_once(':') {
            let method: Method = m.parse()?;
            if method == Method::Hm {
                return Err(Error::arg("HM takes no tuning density"));
            }
            return Ok(ToolId::Marginal { method, tuning: Some(t.parse()?) });
        }
        if s == "HM" {
            return Ok(ToolId::Marginal { method: Method::Hm, tuning: None });
        }
        s.parse::<Criterion>()
            .map(ToolId::Criterion)
            .map_err(|_| Error::arg(format!("unknown tool `{s}`")))
    }
}

impl Serialize for ToolId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for ToolId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of applying one tool to the per-model scores of a replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tool: ToolId,
    pub selected: Option<ModelId>,
    /// Another model had exactly the same best score.
    pub tie: bool,
    /// Scores in the order of `models`; `None` where the tool failed.
    pub scores: Vec<Option<f64>>,
    pub models: Vec<ModelId>,
}

/// Picks the preferred model; exact ties go to the simpler model and are
/// flagged. Models without a score are skipped.
pub fn select(tool: ToolId, models: &[ModelId], scores: &[Option<f64>]) -> Selection {
    let dir = tool.direction();
    let mut best: Option<(ModelId, f64)> = None;
    let mut tie = false;
    for (&m, s) in models.iter().zip(scores) {
        let Some(v) = *s else { continue };
        match best {
            None => best = Some((m, v)),
            Some((bm, bv)) => match dir.compare(v, bv) {
                std::cmp::Ordering::Less => {
                    best = Some((m, v));
                    tie = false;
                }
                std::cmp::Ordering::Equal => {
                    tie = true;
                    if m.complexity() < bm.complexity() {
                        best = Some((m, v));
                    }
                }
                std::cmp::Ordering::Greater => {}
            },
        }
    }
    Selection {
        tool,
        selected: best.map(|b| b.0),
        tie,
        scores: scores.to_vec(),
        models: models.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn there_are_25_distinct_tools() {
        let all = ToolId::all();
        assert_eq!(all.len(), 25);
        let mut labels: Vec<String> = all.iter().map(|t| t.label()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 25);
        for t in &all {
            assert_eq!(t.label().parse::<ToolId>().unwrap(), *t);
        }
    }

    #[test]
    fn directions_and_ties() {
        let models = ModelId::ALL;
        let hm = ToolId::Marginal { method: Method::Hm, tuning: None };
        let s = select(hm, &models, &[Some(-10.0), Some(-3.0), Some(-3.0), None]);
        assert_eq!(s.selected, Some(ModelId::M3));
        assert!(s.tie);
        let dic = ToolId::Criterion(Criterion::Dic1);
        let s = select(dic, &models, &[Some(5.0), Some(7.0), Some(6.0), Some(5.5)]);
        assert_eq!(s.selected, Some(ModelId::M1));
        assert!(!s.tie);
        assert_eq!(select(dic, &models, &[None; 4]).selected, None);
    }
}
