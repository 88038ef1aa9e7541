use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::simplex::Profile;

/// Serializable outcome of one check, shared by the library and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub mechanism: String,
    pub profile: Option<Profile>,
    /// Always carries a boolean `passed` entry next to check-specific values.
    pub result: Value,
    pub witness: Value,
    pub stats: Value,
    pub seed: u64,
}

impl VerificationReport {
    pub fn new(check: &str, mechanism: &str, seed: u64, passed: bool) -> Self {
        VerificationReport {
            check: check.to_string(),
            mechanism: mechanism.to_string(),
            profile: None,
            result: json!({ "passed": passed }),
            witness: Value::Null,
            stats: Value::Null,
            seed,
        }
    }

    pub fn with_profile(mut self, profile: &Profile) -> Self {
        self.profile = Some(profile.clone());
        self
    }

    /// Adds `key` to the result object.
    pub fn with_result(mut self, key: &str, value: impl Serialize) -> Self {
        if let Value::Object(map) = &mut self.result {
            map.insert(key.to_string(), to_value(value));
        }
        self
    }

    pub fn with_witness(mut self, witness: impl Serialize) -> Self {
        self.witness = to_value(witness);
        self
    }

    pub fn with_stats(mut self, stats: impl Serialize) -> Self {
        self.stats = to_value(stats);
        self
    }

    pub fn passed(&self) -> bool {
        self.result
            .get("passed")
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_layout() {
        let r = VerificationReport::new("fairness", "ladder", 1729, true).with_result("l1", 0.5);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "check",
            "mechanism",
            "profile",
            "result",
            "witness",
            "stats",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(r.passed());
        assert_eq!(v["result"]["l1"], 0.5);
    }
}
