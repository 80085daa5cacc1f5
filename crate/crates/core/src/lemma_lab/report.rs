use serde::Serialize;

/// How an inequality was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo {
        trials: usize,
        estimate: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `lhs <= factor * rhs`.
    Le,
    /// `lhs == factor * rhs`.
    Eq,
}

/// One inequality (or identity) of a lemma, evaluated on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
    /// Reason the clause was not evaluated; skipped clauses pass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl Check {
    /// `lhs <= factor * rhs` up to `tolerance * (1 + |factor * rhs|)`.
    pub fn le(name: &str, lhs: f64, factor: f64, rhs: f64, tolerance: f64) -> Self {
        let bound = factor * rhs;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            factor,
            relation: Relation::Le,
            tolerance,
            pass: lhs <= bound + tolerance * (1.0 + bound.abs()),
            skipped: None,
        }
    }

    /// `|lhs - rhs| <= tolerance * (1 + |rhs|)`.
    pub fn eq(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            factor: 1.0,
            relation: Relation::Eq,
            tolerance,
            pass: (lhs - rhs).abs() <= tolerance * (1.0 + rhs.abs()),
            skipped: None,
        }
    }

    pub fn skipped(name: &str, reason: &str) -> Self {
        Self {
            name: name.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            factor: f64::NAN,
            relation: Relation::Le,
            tolerance: 0.0,
            pass: true,
            skipped: Some(reason.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub instance: String,
    pub method: Method,
    pub checks: Vec<Check>,
    pub pass: bool,
    /// Serialized instance for replay, attached by suites on failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<serde_json::Value>,
}

impl LemmaReport {
    pub fn new(lemma: &str, instance: String, method: Method, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            lemma: lemma.to_string(),
            instance,
            method,
            checks,
            pass,
            replay: None,
        }
    }

    /// The first check, which carries the lemma's headline inequality.
    pub fn primary(&self) -> &Check {
        &self.checks[0]
    }
}
