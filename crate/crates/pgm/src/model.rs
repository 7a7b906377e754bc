//! Binary graphical models.
//!
//! Every variable has two values: `0` is *false* and `1` is *true*. Factor
//! tables are stored row-major over the factor scope, with the first scope
//! variable most significant. For a pairwise factor over `(x, y)` the table
//! order is therefore `(0,0), (0,1), (1,0), (1,1)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Number of values every variable takes.
pub const CARDINALITY: usize = 2;

/// A binary random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: usize,
    pub name: String,
    pub cardinality: usize,
    /// Marks a variable that is intentionally untouched by any factor. Such a
    /// variable is uniformly distributed.
    pub isolated: bool,
}

impl Variable {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            cardinality: CARDINALITY,
            isolated: false,
        }
    }
}

/// A nonnegative table over one or two variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    /// Builds a factor, checking the table shape and that values are finite
    /// and nonnegative.
    pub fn new(scope: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let factor = Self { scope, values };
        if let Some(problem) = factor.problems().into_iter().next() {
            return Err(Error::InvalidFactor(problem));
        }
        Ok(factor)
    }

    /// Builds a factor without any checks. `validate_model` reports whatever
    /// is wrong with it later.
    pub fn new_unchecked(scope: Vec<usize>, values: Vec<f64>) -> Self {
        Self { scope, values }
    }

    pub fn unary(var: usize, p_false: f64, p_true: f64) -> Result<Self> {
        Self::new(vec![var], vec![p_false, p_true])
    }

    pub fn pairwise(x: usize, y: usize, values: [f64; 4]) -> Result<Self> {
        Self::new(vec![x, y], values.to_vec())
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Value at a full assignment of the scope, given as `bool`s in scope order.
    pub fn value_at(&self, assignment: &[bool]) -> f64 {
        debug_assert_eq!(assignment.len(), self.scope.len());
        let idx = assignment
            .iter()
            .fold(0usize, |acc, &bit| (acc << 1) | usize::from(bit));
        self.values[idx]
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scope: self.scope.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scope.is_empty() || self.scope.len() > 2 {
            out.push(format!("scope has {} variables, expected 1 or 2", self.scope.len()));
        }
        if self.scope.len() == 2 && self.scope[0] == self.scope[1] {
            out.push(format!("scope repeats variable {}", self.scope[0]));
        }
        let expected = CARDINALITY.pow(self.scope.len() as u32);
        if self.values.len() != expected {
            out.push(format!("table has {} entries, expected {expected}", self.values.len()));
        }
        if self.values.iter().any(|v| v.is_nan() || v.is_infinite()) {
            out.push("non-finite factor value".to_string());
        }
        if self.values.iter().any(|&v| v < 0.0) {
            out.push("negative factor value".to_string());
        }
        out
    }
}

/// A set of binary variables and the factors defined over them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphicalModel {
    pub variables: Vec<Variable>,
    pub factors: Vec<Factor>,
    pub metadata: BTreeMap<String, String>,
}

impl GraphicalModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable and returns its id.
    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        let id = self.variables.len();
        self.variables.push(Variable::new(id, name));
        id
    }

    pub fn add_factor(&mut self, factor: Factor) {
        self.factors.push(factor);
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Variable ids with no incident factor.
    pub fn uncovered_variables(&self) -> Vec<usize> {
        let mut touched = vec![false; self.variables.len()];
        for f in &self.factors {
            for &v in f.scope() {
                if v < touched.len() {
                    touched[v] = true;
                }
            }
        }
        touched
            .iter()
            .enumerate()
            .filter(|(_, &t)| !t)
            .map(|(i, _)| i)
            .collect()
    }

    /// Marks every variable without factors as isolated.
    pub fn mark_isolated(&mut self) {
        for id in self.uncovered_variables() {
            self.variables[id].isolated = true;
        }
    }

    /// Checks every structural invariant. Violations are returned as data.
    pub fn validate(&self) -> Vec<Violation> {
        validate_model(self)
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }
}

/// What is wrong with a model, and where.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    VariableId { index: usize, id: usize },
    Cardinality { variable: usize, cardinality: usize },
    UnknownVariable { factor: usize, variable: usize },
    Factor { factor: usize, problem: String },
    Uncovered { variable: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VariableId { index, id } => {
                write!(f, "variable at position {index} has id {id}")
            }
            Violation::Cardinality { variable, cardinality } => {
                write!(f, "variable {variable} has cardinality {cardinality}, expected 2")
            }
            Violation::UnknownVariable { factor, variable } => {
                write!(f, "factor {factor} references unknown variable {variable}")
            }
            Violation::Factor { factor, problem } => write!(f, "factor {factor}: {problem}"),
            Violation::Uncovered { variable } => {
                write!(f, "variable {variable} has no factors and is not marked isolated")
            }
        }
    }
}

/// Returns every invariant violation in `model`; an empty list means valid.
pub fn validate_model(model: &GraphicalModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.variables.len();
    for (index, var) in model.variables.iter().enumerate() {
        if var.id != index {
            out.push(Violation::VariableId { index, id: var.id });
        }
        if var.cardinality != CARDINALITY {
            out.push(Violation::Cardinality {
                variable: index,
                cardinality: var.cardinality,
            });
        }
    }
    for (fi, factor) in model.factors.iter().enumerate() {
        for &v in factor.scope() {
            if v >= n {
                out.push(Violation::UnknownVariable {
                    factor: fi,
                    variable: v,
                });
            }
        }
        for problem in factor.problems() {
            out.push(Violation::Factor { factor: fi, problem });
        }
    }
    for id in model.uncovered_variables() {
        if !model.variables[id].isolated {
            out.push(Violation::Uncovered { variable: id });
        }
    }
    out
}

/// Posterior `(P(false), P(true))` for every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    entries: Vec<[f64; 2]>,
}

impl MarginalTable {
    pub fn new(entries: Vec<[f64; 2]>) -> Self {
        Self { entries }
    }

    /// Normalizes unnormalized `(false, true)` masses.
    pub(crate) fn from_masses(masses: Vec<[f64; 2]>) -> Self {
        let entries = masses
            .into_iter()
            .map(|[f, t]| {
                let s = f + t;
                [f / s, t / s]
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, var: usize) -> [f64; 2] {
        self.entries[var]
    }

    pub fn p_true(&self, var: usize) -> f64 {
        self.entries[var][1]
    }

    pub fn p_false(&self, var: usize) -> f64 {
        self.entries[var][0]
    }

    pub fn entries(&self) -> &[[f64; 2]] {
        &self.entries
    }

    /// Largest absolute difference between matching entries.
    pub fn max_abs_diff(&self, other: &MarginalTable) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }
}
