//! Partitions of cases for group comparisons.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedGroup {
    pub name: String,
    pub members: Vec<String>,
}

/// How cases are split into groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "lowercase")]
pub enum GroupSpec {
    /// One group per distinct value of an attribute, e.g. the course.
    Attribute { key: String },
    /// `Q1` at or below the `lower` quantile of a numeric attribute, `Q3` at
    /// or above the `upper` one, `Middle` in between.
    Quantile { key: String, lower: f64, upper: f64 },
    /// `Top{n}`, `Others`, `Bottom{n}` by a numeric attribute.
    Rank { key: String, n: usize },
    /// Explicit member lists; unlisted cases are left out.
    Lists { groups: Vec<NamedGroup> },
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec::Rank {
            key: "score".into(),
            n: 5,
        }
    }
}

/// Attributes of one case, taken from its first event.
pub type CaseAttributes = BTreeMap<String, BTreeMap<String, String>>;

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Quantile { lower, upper, .. } => {
                if !(0.0 <= *lower && lower < upper && *upper <= 1.0) {
                    return Err(Error::arg("quantiles need 0 <= lower < upper <= 1"));
                }
            }
            GroupSpec::Rank { n, .. } if *n == 0 => return Err(Error::arg("rank groups need n >= 1")),
            GroupSpec::Lists { groups } if groups.is_empty() => {
                return Err(Error::arg("no groups listed"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Splits `cases` into non-empty groups, in a fixed order.
    pub fn assign(&self, cases: &CaseAttributes) -> Result<Vec<NamedGroup>> {
        self.validate()?;
        if cases.is_empty() {
            return Err(Error::Validation("no cases to group".into()));
        }
        let groups = match self {
            GroupSpec::Attribute { key } => {
                let mut by: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for (id, attrs) in cases {
                    by.entry(attr(attrs, id, key)?.to_owned()).or_default().push(id.clone());
                }
                by.into_iter()
                    .map(|(name, members)| NamedGroup { name, members })
                    .collect()
            }
            GroupSpec::Quantile { key, lower, upper } => {
                let vals = numeric(cases, key)?;
                let sorted: Vec<f64> = {
                    let mut v: Vec<f64> = vals.iter().map(|x| x.1).collect();
                    v.sort_by(f64::total_cmp);
                    v
                };
                let (lo, hi) = (quantile(&sorted, *lower), quantile(&sorted, *upper));
                let mut g = [Vec::new(), Vec::new(), Vec::new()];
                for (id, x) in vals {
                    let slot = if x <= lo {
                        0
                    } else if x >= hi {
                        2
                    } else {
                        1
                    };
                    g[slot].push(id);
                }
                let [q1, mid, q3] = g;
                vec![named("Q1", q1), named("Middle", mid), named("Q3", q3)]
            }
            GroupSpec::Rank { key, n } => {
                let mut vals = numeric(cases, key)?;
                if vals.len() < 2 * n {
                    return Err(Error::Validation(format!(
                        "{} cases cannot form top and bottom groups of {n}",
                        vals.len()
                    )));
                }
                vals.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
                let ids: Vec<String> = vals.into_iter().map(|v| v.0).collect();
                let bottom = ids[..*n].to_vec();
                let others = ids[*n..ids.len() - n].to_vec();
                let top = ids[ids.len() - n..].to_vec();
                vec![
                    named(&format!("Top{n}"), top),
                    named("Others", others),
                    named(&format!("Bottom{n}"), bottom),
                ]
            }
            GroupSpec::Lists { groups } => groups
                .iter()
                .map(|g| NamedGroup {
                    name: g.name.clone(),
                    members: g
                        .members
                        .iter()
                        .filter(|m| cases.contains_key(*m))
                        .cloned()
                        .collect(),
                })
                .collect(),
        };
        Ok(groups.into_iter().filter(|g| !g.members.is_empty()).collect())
    }
}

fn named(name: &str, mut members: Vec<String>) -> NamedGroup {
    members.sort();
    NamedGroup {
        name: name.to_owned(),
        members,
    }
}

fn attr<'a>(attrs: &'a BTreeMap<String, String>, id: &str, key: &str) -> Result<&'a str> {
    attrs
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Validation(format!("case `{id}` has no `{key}` attribute")))
}

fn numeric(cases: &CaseAttributes, key: &str) -> Result<Vec<(String, f64)>> {
    cases
        .iter()
        .map(|(id, attrs)| {
            let raw = attr(attrs, id, key)?;
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| (id.clone(), x))
                .ok_or_else(|| Error::Validation(format!("case `{id}`: `{key}` = {raw:?} is not a number")))
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}
