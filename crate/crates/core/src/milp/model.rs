use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::build::ModelOptions;
use crate::domain::Subprocess;

/// Index of a variable inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// Structured identity of a model variable. Part, batch and orientation
/// indices are zero-based; names are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKey {
    /// `X_jb`: part in batch.
    Assign { part: usize, batch: usize },
    /// `Y_jk`: part uses orientation.
    Orient { part: usize, orientation: usize },
    /// `Z_b`: batch opened.
    Open { batch: usize },
    /// `x_j`
    PosX { part: usize },
    /// `y_j`
    PosY { part: usize },
    /// `O_j`: length along the platform length.
    Turn { part: usize },
    /// `PL_jj'`: `first` entirely left of `second`.
    Left { first: usize, second: usize },
    /// `PB_jj'`: `first` entirely below `second`.
    Below { first: usize, second: usize },
    /// `H_b`
    Height { batch: usize },
    /// `E_b`
    Energy { batch: usize },
    /// `T_lb`
    Time { subprocess: Subprocess, batch: usize },
    /// `e_jb`: support volume of part in batch.
    Support { part: usize, batch: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::Assign { part, batch } => write!(f, "X_j{}_b{}", part + 1, batch + 1),
            VarKey::Orient { part, orientation } => write!(f, "Y_j{}_k{}", part + 1, orientation + 1),
            VarKey::Open { batch } => write!(f, "Z_b{}", batch + 1),
            VarKey::PosX { part } => write!(f, "x_j{}", part + 1),
            VarKey::PosY { part } => write!(f, "y_j{}", part + 1),
            VarKey::Turn { part } => write!(f, "O_j{}", part + 1),
            VarKey::Left { first, second } => write!(f, "PL_j{}_j{}", first + 1, second + 1),
            VarKey::Below { first, second } => write!(f, "PB_j{}_j{}", first + 1, second + 1),
            VarKey::Height { batch } => write!(f, "H_b{}", batch + 1),
            VarKey::Energy { batch } => write!(f, "E_b{}", batch + 1),
            VarKey::Time { subprocess, batch } => write!(f, "T_{}_b{}", subprocess.code(), batch + 1),
            VarKey::Support { part, batch } => write!(f, "e_j{}_b{}", part + 1, batch + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    /// `None` is +∞.
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Constraint family, named after the formulation's numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    /// Batch must be open to receive parts.
    C1,
    /// One batch per part.
    C2,
    /// One orientation per part.
    C3,
    /// Border scan time.
    C4,
    /// Contour fill time.
    C5,
    /// Volume hatching time.
    C6,
    /// Preheat time.
    C8,
    /// Cool time.
    C9,
    /// Batch height.
    C10,
    /// Recoat time.
    C11,
    /// Batch energy.
    C12,
    /// Machine height.
    C13,
    C14,
    C15,
    C16,
    C17,
    C18,
    C19,
    C20,
    C21,
    /// At least one positional relation for parts sharing a batch.
    C22,
    /// Opened batches form a suffix of the batch list.
    C31,
    /// Support volume of a part in a batch.
    C32,
    /// Support scan time.
    C33,
}

impl Family {
    pub fn code(self) -> &'static str {
        match self {
            Family::C1 => "c1",
            Family::C2 => "c2",
            Family::C3 => "c3",
            Family::C4 => "c4",
            Family::C5 => "c5",
            Family::C6 => "c6",
            Family::C8 => "c8",
            Family::C9 => "c9",
            Family::C10 => "c10",
            Family::C11 => "c11",
            Family::C12 => "c12",
            Family::C13 => "c13",
            Family::C14 => "c14",
            Family::C15 => "c15",
            Family::C16 => "c16",
            Family::C17 => "c17",
            Family::C18 => "c18",
            Family::C19 => "c19",
            Family::C20 => "c20",
            Family::C21 => "c21",
            Family::C22 => "c22",
            Family::C31 => "c31",
            Family::C32 => "c32",
            Family::C33 => "c33",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

/// Solver-agnostic MILP: variables, linear constraints and a minimisation
/// objective, plus the registry mapping structured keys to variables.
#[derive(Debug, Clone, Default)]
pub struct LinearModel {
    variables: Vec<Variable>,
    keys: Vec<Option<VarKey>>,
    lookup: HashMap<VarKey, VarId>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    n_batches: usize,
    n_parts: usize,
    options: ModelOptions,
}

impl LinearModel {
    /// An empty model with no variables or constraints.
    pub fn empty() -> Self {
        LinearModel::default()
    }

    pub(crate) fn with_shape(n_parts: usize, n_batches: usize, options: ModelOptions) -> Self {
        LinearModel { n_parts, n_batches, options, ..LinearModel::default() }
    }

    pub(crate) fn add_key(&mut self, key: VarKey, kind: VarKind, lower: f64, upper: Option<f64>) -> VarId {
        let id = self.add_variable(key.to_string(), kind, lower, upper);
        self.keys[id.0] = Some(key);
        self.lookup.insert(key, id);
        id
    }

    /// Adds an unregistered variable. Binary variables get bounds [0, 1].
    pub fn add_variable(&mut self, name: String, kind: VarKind, lower: f64, upper: Option<f64>) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, Some(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        let id = VarId(self.variables.len());
        self.variables.push(Variable { name, kind, lower, upper });
        self.keys.push(None);
        id
    }

    pub fn add_constraint(&mut self, name: String, family: Family, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint { name, family, terms, sense, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = terms;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.lookup.get(&key).copied()
    }

    pub fn key(&self, id: VarId) -> Option<VarKey> {
        self.keys.get(id.0).copied().flatten()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn count_family(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    pub fn n_batches(&self) -> usize {
        self.n_batches
    }

    /// Options the model was built with; defaults for hand-built models.
    pub fn options(&self) -> ModelOptions {
        self.options
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Names of violated constraints, bounds and integrality requirements.
    /// `tol` is relative to `max(1, |rhs|)`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if values.len() != self.variables.len() {
            out.push(format!("expected {} values, got {}", self.variables.len(), values.len()));
            return out;
        }
        for (v, &x) in self.variables.iter().zip(values) {
            let slack = tol * x.abs().max(1.0);
            if x < v.lower - slack || v.upper.is_some_and(|u| x > u + slack) {
                out.push(format!("bound of {}", v.name));
            }
            if v.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                out.push(format!("integrality of {}", v.name));
            }
        }
        for c in &self.constraints {
            let lhs = c.lhs(values);
            let slack = tol * c.rhs.abs().max(1.0);
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + slack,
                Sense::Ge => lhs >= c.rhs - slack,
                Sense::Eq => (lhs - c.rhs).abs() <= slack,
            };
            if !ok {
                out.push(c.name.clone());
            }
        }
        out
    }
}
