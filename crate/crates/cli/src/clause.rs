//! Constraint clauses of the form `name:key=value:...`.
//!
//! Vector parameters take comma-separated lists; a single value is repeated
//! to the coefficient dimension. `v` sets the initial weight (default 1).

use std::collections::BTreeMap;

use distglm::{ConstraintSet, ConstraintSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub name: String,
    params: BTreeMap<String, String>,
}

impl Clause {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut parts = text.split(':');
        let name = parts.next().unwrap_or_default().trim().to_ascii_lowercase();
        if name.is_empty() {
            return Err(CliError::Usage(format!("empty constraint clause `{text}`")));
        }
        let mut params = BTreeMap::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected key=value in `{text}`, got `{part}`")))?;
            if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("duplicate key `{k}` in `{text}`")));
            }
        }
        Ok(Self { name, params })
    }

    fn take(&mut self, key: &str) -> Result<String, CliError> {
        self.params
            .remove(key)
            .ok_or_else(|| CliError::Usage(format!("constraint `{}` needs `{key}=`", self.name)))
    }

    fn number(&mut self, key: &str) -> Result<f64, CliError> {
        let raw = self.take(key)?;
        raw.parse()
            .map_err(|_| CliError::Usage(format!("`{key}={raw}` is not a number")))
    }

    fn count(&mut self, key: &str) -> Result<usize, CliError> {
        let raw = self.take(key)?;
        raw.parse()
            .map_err(|_| CliError::Usage(format!("`{key}={raw}` is not a nonnegative integer")))
    }

    fn vector(&mut self, key: &str, n: usize) -> Result<Vec<f64>, CliError> {
        let raw = self.take(key)?;
        let values = raw
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("`{key}={raw}` is not a list of numbers")))?;
        Ok(if values.len() == 1 { vec![values[0]; n] } else { values })
    }

    /// Builds the validated constraint for coefficient dimension `n`.
    pub fn resolve(&self, n: usize) -> Result<ConstraintSpec, CliError> {
        let mut c = self.clone();
        let weight = if c.params.contains_key("v") {
            c.number("v")?
        } else {
            1.0
        };
        let set = match c.name.as_str() {
            "sparsity" | "sparse" => ConstraintSet::Sparsity { k: c.count("k")? },
            "isotone" | "isotonic" => ConstraintSet::Isotone,
            "rank" => ConstraintSet::Rank {
                r: c.count("r")?,
                rows: c.count("rows")?,
                cols: c.count("cols")?,
            },
            "box" => ConstraintSet::Box {
                lower: c.vector("lower", n)?,
                upper: c.vector("upper", n)?,
            },
            "ball" => ConstraintSet::Ball {
                center: c.vector("center", n)?,
                radius: c.number("radius")?,
            },
            "hyperplane" => ConstraintSet::Hyperplane {
                a: c.vector("a", n)?,
                b: c.number("b")?,
            },
            "halfspace" => ConstraintSet::HalfSpace {
                a: c.vector("a", n)?,
                b: c.number("b")?,
            },
            "nonnegative" | "nonneg" => ConstraintSet::NonNegative,
            other => return Err(CliError::Usage(format!("unknown constraint `{other}`"))),
        };
        if let Some(extra) = c.params.keys().next() {
            return Err(CliError::Usage(format!(
                "constraint `{}` has no parameter `{extra}`",
                c.name
            )));
        }
        let spec = ConstraintSpec::new(set, weight)?;
        spec.validate_dim(n)?;
        Ok(spec)
    }
}
