use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::dataset::{Interaction, Role};
use crate::error::{Error, Result};

pub const ENCODING_SPEC_VERSION: u32 = 1;

/// Declarative recoding of raw survey columns into a design matrix.
///
/// Serialized as TOML; see `docs/encoding-spec.md` for the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub version: u32,
    pub outcome: OutcomeRule,
    #[serde(default)]
    pub missing: MissingPolicy,
    pub variables: Vec<VariableRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<Interaction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRule {
    pub column: String,
    /// When set, the outcome is 1 where the cell equals this label and 0 elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    DropListwise,
    /// Missing cells become 0 on the encoded scale and a `name[missing]` indicator is added.
    ImputeZeroIndicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRule {
    /// Raw column read by this rule.
    pub column: String,
    /// Output variable name; defaults to the raw column name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub role: Role,
    #[serde(flatten)]
    pub kind: RuleKind,
}

impl VariableRule {
    pub fn output_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.column)
    }

    /// Design column names this rule produces (excluding missing indicators).
    pub fn design_names(&self) -> Vec<String> {
        match &self.kind {
            RuleKind::Categorical {
                levels, baseline, ..
            } => levels
                .iter()
                .filter(|l| *l != baseline)
                .map(|l| dummy_name(self.output_name(), l))
                .collect(),
            _ => vec![self.output_name().to_string()],
        }
    }
}

pub(crate) fn dummy_name(var: &str, level: &str) -> String {
    format!("{var}[{level}]")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RuleKind {
    Numeric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transform: Option<Transform>,
        #[serde(default = "default_true")]
        standardize: bool,
    },
    Categorical {
        /// Output levels in dummy order.
        levels: Vec<String>,
        baseline: String,
        /// Raw label to output level.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        merge: BTreeMap<String, String>,
    },
    Derived {
        transform: Transform,
        #[serde(default = "default_true")]
        standardize: bool,
    },
}

/// Single-column expression applied to a numeric cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `offset + scale * value`
    Affine {
        scale: f64,
        offset: f64,
    },
    Log,
    Square,
}

impl Transform {
    pub fn apply(&self, v: f64) -> Option<f64> {
        let out = match *self {
            Transform::Affine { scale, offset } => offset + scale * v,
            Transform::Log => v.ln(),
            Transform::Square => v * v,
        };
        out.is_finite().then_some(out)
    }
}

impl EncodingSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: EncodingSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks the structural invariants that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.version != ENCODING_SPEC_VERSION {
            return Err(Error::Schema(format!(
                "unsupported encoding spec version {} (expected {ENCODING_SPEC_VERSION})",
                self.version
            )));
        }
        let mut outputs = HashSet::new();
        let mut design = HashSet::new();
        for rule in &self.variables {
            let name = rule.output_name();
            if !outputs.insert(name.to_string()) {
                return Err(Error::Schema(format!("duplicate output variable `{name}`")));
            }
            if rule.role == Role::Intercept {
                return Err(Error::Schema(format!(
                    "variable `{name}` cannot take the intercept role"
                )));
            }
            if let RuleKind::Categorical {
                levels,
                baseline,
                merge,
            } = &rule.kind
            {
                let mut seen = HashSet::new();
                for l in levels {
                    if !seen.insert(l.as_str()) {
                        return Err(Error::Schema(format!(
                            "variable `{name}` repeats level `{l}`"
                        )));
                    }
                }
                if !seen.contains(baseline.as_str()) {
                    return Err(Error::Schema(format!(
                        "variable `{name}`: baseline `{baseline}` is not a declared level"
                    )));
                }
                if levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "variable `{name}` needs at least two levels"
                    )));
                }
                for (from, to) in merge {
                    if !seen.contains(to.as_str()) {
                        return Err(Error::Schema(format!(
                            "variable `{name}`: merge `{from}` -> `{to}` targets an undeclared level"
                        )));
                    }
                }
            }
            design.extend(rule.design_names());
        }
        for pair in &self.interactions {
            for side in [&pair.left, &pair.right] {
                if !outputs.contains(side) && !design.contains(side) {
                    return Err(Error::Schema(format!(
                        "interaction references undeclared column `{side}`"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw columns the spec reads, outcome first.
    pub fn referenced_columns(&self) -> Vec<&str> {
        std::iter::once(self.outcome.column.as_str())
            .chain(self.variables.iter().map(|r| r.column.as_str()))
            .collect()
    }
}
