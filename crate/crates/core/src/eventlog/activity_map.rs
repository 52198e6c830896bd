use std::io::Read;

use serde::Deserialize;

use super::Event;
use crate::error::{Error, Result};

pub const SPURIOUS: &str = "Spurious";

/// Every label an [`ActivityMap`] may emit: six IDE activities followed by the
/// judge's native submission verdicts.
pub const ACTIVITY_LABELS: [&str; 12] = [
    "Editing",
    "Navigating",
    "Debugging",
    "Refactoring",
    "Executing",
    SPURIOUS,
    "Accepted_Answer",
    "Wrong_Answer",
    "Compile_Time_Error",
    "Invalid_Submission",
    "Runtime_Error",
    "Time_Limit_Exceeded",
];

const DEFAULT_MAP: &str = include_str!("../../data/activity_map.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum PatternField {
    #[serde(rename = "categoryName")]
    Category,
    #[serde(rename = "commandName")]
    Command,
}

impl PatternField {
    fn attribute(self) -> &'static str {
        match self {
            PatternField::Category => "categoryName",
            PatternField::Command => "commandName",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ActivityRule {
    pub pattern_field: PatternField,
    /// Case-insensitive; `*` matches any run of characters.
    pub pattern: String,
    pub activity: String,
}

impl ActivityRule {
    pub fn matches(&self, event: &Event) -> bool {
        event
            .attr(self.pattern_field.attribute())
            .is_some_and(|v| glob_match(&self.pattern, v))
    }
}

/// Ordered command/category to activity rules. The first matching rule wins;
/// events matching no rule become [`SPURIOUS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMap {
    rules: Vec<ActivityRule>,
    default_label: String,
}

impl Default for ActivityMap {
    fn default() -> Self {
        Self::from_csv(DEFAULT_MAP.as_bytes()).expect("bundled activity map is valid")
    }
}

impl ActivityMap {
    pub fn new(rules: Vec<ActivityRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::ActivityMap("map has no rules".into()));
        }
        for r in &rules {
            if !ACTIVITY_LABELS.contains(&r.activity.as_str()) {
                return Err(Error::ActivityMap(format!(
                    "unknown activity label `{}` for pattern `{}`",
                    r.activity, r.pattern
                )));
            }
        }
        Ok(ActivityMap {
            rules,
            default_label: SPURIOUS.to_owned(),
        })
    }

    /// Reads a `pattern_field,pattern,activity` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rules = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ActivityRule>, _>>()
            .map_err(|e| Error::ActivityMap(e.to_string()))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[ActivityRule] {
        &self.rules
    }

    pub fn label<'a>(&'a self, event: &Event) -> &'a str {
        self.rules
            .iter()
            .find(|r| r.matches(event))
            .map_or(self.default_label.as_str(), |r| r.activity.as_str())
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let t: Vec<char> = text.to_lowercase().chars().collect();
    // Iterative wildcard match with single-star backtracking.
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glob() {
        assert!(glob_match("Run", "run"));
        assert!(glob_match("Debugger*", "DebuggerActions"));
        assert!(glob_match("*Tool*", "NavBarToolbar"));
        assert!(!glob_match("Run", "Rerun"));
        assert!(glob_match("*", ""));
        assert!(!glob_match("a*b", "acbx"));
    }

    #[test]
    fn default_map_loads_and_labels_are_valid() {
        let map = ActivityMap::default();
        assert!(map.rules().len() > 50);
        assert!(map
            .rules()
            .iter()
            .all(|r| ACTIVITY_LABELS.contains(&r.activity.as_str())));
    }

    #[test]
    fn rejects_unknown_label() {
        let csv = "pattern_field,pattern,activity\ncommandName,Run,Sprinting\n";
        assert!(matches!(
            ActivityMap::from_csv(csv.as_bytes()),
            Err(Error::ActivityMap(_))
        ));
    }

    #[test]
    fn rejects_empty_map() {
        let csv = "pattern_field,pattern,activity\n";
        assert!(ActivityMap::from_csv(csv.as_bytes()).is_err());
    }
}
