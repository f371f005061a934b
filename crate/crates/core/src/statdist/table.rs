use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Template,
    Treated,
    Control,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Template => "template",
            Role::Treated => "treated",
            Role::Control => "control",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "template" => Ok(Role::Template),
            "treated" => Ok(Role::Treated),
            "control" => Ok(Role::Control),
            other => Err(Error::data(format!("unknown role `{other}`"))),
        }
    }
}

/// Where a named column lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRef {
    Shared(usize),
    Extended(usize),
    Categorical(usize),
}

/// Units of a study with their roles and covariates.
///
/// Shared covariates are observed for every unit. Extended covariates exist
/// only for treated and control units; template rows hold `NaN` there.
/// Role index lists (`units(Role::Treated)` etc.) follow input order and are
/// the row/column order of every distance matrix built from the table.
#[derive(Debug, Clone)]
pub struct CovariateTable {
    ids: Vec<String>,
    roles: Vec<Role>,
    shared_names: Vec<String>,
    shared: DMatrix<f64>,
    extended_names: Vec<String>,
    extended: DMatrix<f64>,
    categorical: Vec<(String, Vec<String>)>,
    by_role: [Vec<usize>; 3],
    id_index: HashMap<String, usize>,
}

fn role_slot(role: Role) -> usize {
    match role {
        Role::Template => 0,
        Role::Treated => 1,
        Role::Control => 2,
    }
}

impl CovariateTable {
    pub fn new(
        ids: Vec<String>,
        roles: Vec<Role>,
        shared_names: Vec<String>,
        shared: DMatrix<f64>,
        extended_names: Vec<String>,
        extended: DMatrix<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if roles.len() != n || shared.nrows() != n || extended.nrows() != n {
            return Err(Error::dim(format!(
                "{n} ids, {} roles, {} shared rows, {} extended rows",
                roles.len(),
                shared.nrows(),
                extended.nrows()
            )));
        }
        if shared.ncols() != shared_names.len() || extended.ncols() != extended_names.len() {
            return Err(Error::dim("column names do not match matrix widths"));
        }
        let mut id_index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if id_index.insert(id.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate unit id `{id}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in shared_names.iter().chain(&extended_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::data(format!("duplicate column `{name}`")));
            }
        }
        let mut by_role = [Vec::new(), Vec::new(), Vec::new()];
        for (i, &role) in roles.iter().enumerate() {
            by_role[role_slot(role)].push(i);
            if shared.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("unit `{}`: missing shared covariate", ids[i])));
            }
            if role != Role::Template && extended.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "unit `{}`: missing extended covariate",
                    ids[i]
                )));
            }
        }
        Ok(CovariateTable {
            ids,
            roles,
            shared_names,
            shared,
            extended_names,
            extended,
            categorical: Vec::new(),
            by_role,
            id_index,
        })
    }

    /// Adds a string-valued column used for exact matching or fine balance.
    pub fn with_categorical(mut self, name: impl Into<String>, values: Vec<String>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::dim(format!(
                "categorical column `{name}` has {} values for {} units",
                values.len(),
                self.len()
            )));
        }
        if self.column(&name).is_some() {
            return Err(Error::data(format!("duplicate column `{name}`")));
        }
        self.categorical.push((name, values));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, unit: usize) -> &str {
        &self.ids[unit]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn role(&self, unit: usize) -> Role {
        self.roles[unit]
    }

    pub fn units(&self, role: Role) -> &[usize] {
        &self.by_role[role_slot(role)]
    }

    pub fn count(&self, role: Role) -> usize {
        self.units(role).len()
    }

    pub fn shared_names(&self) -> &[String] {
        &self.shared_names
    }

    pub fn extended_names(&self) -> &[String] {
        &self.extended_names
    }

    /// Shared names followed by extended names.
    pub fn covariate_names(&self) -> Vec<String> {
        self.shared_names
            .iter()
            .chain(&self.extended_names)
            .cloned()
            .collect()
    }

    pub fn categorical_names(&self) -> impl Iterator<Item = &str> {
        self.categorical.iter().map(|(n, _)| n.as_str())
    }

    pub fn column(&self, name: &str) -> Option<ColumnRef> {
        if let Some(j) = self.shared_names.iter().position(|n| n == name) {
            return Some(ColumnRef::Shared(j));
        }
        if let Some(j) = self.extended_names.iter().position(|n| n == name) {
            return Some(ColumnRef::Extended(j));
        }
        self.categorical
            .iter()
            .position(|(n, _)| n == name)
            .map(ColumnRef::Categorical)
    }

    /// Numeric values of a shared or extended column for the given units.
    pub fn numeric_values(&self, name: &str, units: &[usize]) -> Result<Vec<f64>> {
        match self.column(name) {
            Some(ColumnRef::Shared(j)) => Ok(units.iter().map(|&u| self.shared[(u, j)]).collect()),
            Some(ColumnRef::Extended(j)) => {
                Ok(units.iter().map(|&u| self.extended[(u, j)]).collect())
            }
            Some(ColumnRef::Categorical(_)) => Err(Error::data(format!(
                "column `{name}` is categorical, not numeric"
            ))),
            None => Err(Error::UnknownColumn(name.to_string())),
        }
    }

    /// Values of any column rendered as comparison keys; numeric columns use
    /// their exact bit pattern.
    pub fn category_keys(&self, name: &str, units: &[usize]) -> Result<Vec<String>> {
        match self.column(name) {
            Some(ColumnRef::Categorical(j)) => {
                let values = &self.categorical[j].1;
                Ok(units.iter().map(|&u| values[u].clone()).collect())
            }
            Some(_) => Ok(self
                .numeric_values(name, units)?
                .into_iter()
                .map(|v| format!("{v}"))
                .collect()),
            None => Err(Error::UnknownColumn(name.to_string())),
        }
    }

    pub fn shared_row(&self, unit: usize) -> Vec<f64> {
        self.shared.row(unit).iter().copied().collect()
    }

    /// Rows of shared covariates for `units`.
    pub fn shared_matrix(&self, units: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(units.len(), self.shared.ncols(), |i, j| self.shared[(units[i], j)])
    }

    /// Rows of shared followed by extended covariates for `units`.
    pub fn full_matrix(&self, units: &[usize]) -> DMatrix<f64> {
        let d1 = self.shared.ncols();
        let d2 = self.extended.ncols();
        DMatrix::from_fn(units.len(), d1 + d2, |i, j| {
            if j < d1 {
                self.shared[(units[i], j)]
            } else {
                self.extended[(units[i], j - d1)]
            }
        })
    }

    /// Fails unless the table holds at least one unit of each listed role.
    pub fn require_roles(&self, roles: &[Role]) -> Result<()> {
        for &role in roles {
            if self.count(role) == 0 {
                return Err(Error::data(format!("no {role} units")));
            }
        }
        Ok(())
    }
}
