use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use super::experiments::{ExperimentResult, ExperimentSpec};
use crate::compression::CodecId;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub name: String,
    pub kind: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ExperimentResult>,
}

/// Everything one `eval` run produced, with the spec echoed back.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub tool_version: String,
    pub codec: CodecId,
    /// Digest of the spec's base pool, or `None` if it failed to load.
    pub pool_digest: Option<String>,
    pub config: ExperimentSpec,
    pub experiments: Vec<ExperimentOutcome>,
}

impl EvaluationReport {
    pub fn failed(&self) -> usize {
        self.experiments.iter().filter(|e| e.status == Status::Failed).count()
    }

    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Curves of every curve-producing experiment as
    /// `experiment,k,method,normalized_coverage`.
    pub fn write_curves_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "k", "method", "normalized_coverage"])?;
        for exp in &self.experiments {
            let curves = match &exp.result {
                Some(ExperimentResult::Curves(c)) => &c.comparison,
                Some(ExperimentResult::LengthConfound(c)) => &c.filtered_curves.comparison,
                _ => continue,
            };
            for curve in [&curves.tsdm, &curves.greedy, &curves.random] {
                for p in &curve.points {
                    w.write_record([
                        exp.name.clone(),
                        p.k.to_string(),
                        curve.method.to_string(),
                        p.normalized.to_string(),
                    ])?;
                }
            }
        }
        w.flush()
    }
}

/// Removes every `timing` key, at any depth, leaving only values that are
/// expected to be reproducible.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn timing_is_stripped_everywhere() {
        let mut v = json!({"a": 1, "timing": 2, "b": [{"timing": {"x": 1}, "c": 3}]});
        strip_timing(&mut v);
        assert_eq!(v, json!({"a": 1, "b": [{"c": 3}]}));
    }
}
