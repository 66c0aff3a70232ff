//! Objectives, feasible polyhedra and problem instances.
//!
//! Objectives are multivariate polynomials stored as monomial lists, so the
//! value, gradient and Hessian are all exact. The feasible set is the
//! polyhedron `{x : A x <= b}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Absolute per-row feasibility tolerance.
pub const TAU_FEAS: f64 = 1e-9;

/// One term `coeff * prod_i x_i^exponents[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<u32>) -> Self {
        Self { coeff, exponents }
    }

    fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Partial derivative along `axis`, or `None` when it vanishes identically.
    fn differentiate(&self, axis: usize) -> Option<Monomial> {
        let e = self.exponents[axis];
        if e == 0 || self.coeff == 0.0 {
            return None;
        }
        let mut exponents = self.exponents.clone();
        exponents[axis] -= 1;
        Some(Monomial {
            coeff: self.coeff * e as f64,
            exponents,
        })
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.exponents
            .iter()
            .zip(x.iter())
            .fold(self.coeff, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }
}

/// A polynomial objective with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveModel {
    pub dimension: usize,
    pub terms: Vec<Monomial>,
}

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl ObjectiveModel {
    pub fn new(dimension: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInstance("dimension must be positive".into()));
        }
        for t in &terms {
            if t.exponents.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: t.exponents.len(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInstance("non-finite coefficient".into()));
            }
        }
        Ok(Self { dimension, terms })
    }

    /// Dense quadratic `c + l^T x + 1/2 x^T Q x` as a monomial list.
    pub fn quadratic(constant: f64, linear: &DVector<f64>, q: &DMatrix<f64>) -> Self {
        let n = linear.len();
        let mut terms = Vec::new();
        if constant != 0.0 {
            terms.push(Monomial::new(constant, vec![0; n]));
        }
        for i in 0..n {
            if linear[i] != 0.0 {
                let mut e = vec![0; n];
                e[i] = 1;
                terms.push(Monomial::new(linear[i], e));
            }
        }
        for i in 0..n {
            if q[(i, i)] != 0.0 {
                let mut e = vec![0; n];
                e[i] = 2;
                terms.push(Monomial::new(0.5 * q[(i, i)], e));
            }
            for j in (i + 1)..n {
                let c = 0.5 * (q[(i, j)] + q[(j, i)]);
                if c != 0.0 {
                    let mut e = vec![0; n];
                    e[i] = 1;
                    e[j] = 1;
                    terms.push(Monomial::new(c, e));
                }
            }
        }
        Self { dimension: n, terms }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.terms.iter().map(|t| t.eval(x)).sum())
    }

    /// Exact value, gradient and (symmetric) Hessian.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        self.check_dim(x)?;
        let n = self.dimension;
        let mut f = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for t in &self.terms {
            f += t.eval(x);
            for i in 0..n {
                let Some(di) = t.differentiate(i) else { continue };
                g[i] += di.eval(x);
                for j in i..n {
                    if let Some(dij) = di.differentiate(j) {
                        let v = dij.eval(x);
                        h[(i, j)] += v;
                        if i != j {
                            h[(j, i)] += v;
                        }
                    }
                }
            }
        }
        Ok(Evaluation { f, g, h })
    }

    /// Conservative derivative bounds valid on the box `|x_i| <= radius`.
    ///
    /// Entrywise bounds are aggregated with Frobenius norms, which dominate
    /// the spectral norms used by the analysis constants.
    pub fn bounds_on_box(&self, radius: f64) -> DerivativeBounds {
        let n = self.dimension;
        let r = radius.abs().max(1.0);
        let bound = |m: &Monomial| m.coeff.abs() * r.powi(m.degree() as i32);
        let mut f_abs = 0.0;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut third = vec![0.0; n * n * n];
        for t in &self.terms {
            f_abs += bound(t);
            for i in 0..n {
                let Some(di) = t.differentiate(i) else { continue };
                grad[i] += bound(&di);
                for j in 0..n {
                    let Some(dij) = di.differentiate(j) else { continue };
                    hess[i * n + j] += bound(&dij);
                    for l in 0..n {
                        if let Some(dijl) = dij.differentiate(l) {
                            third[(i * n + j) * n + l] += bound(&dijl);
                        }
                    }
                }
            }
        }
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        DerivativeBounds {
            f_abs_max: f_abs,
            g_max: norm(&grad),
            h_max: norm(&hess),
            h_lip: norm(&third),
        }
    }
}

/// Sup-bounds of the objective and its derivatives over a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBounds {
    pub f_abs_max: f64,
    pub g_max: f64,
    pub h_max: f64,
    pub h_lip: f64,
}

/// Feasible set `{x : A x <= b}` with `m >= 0` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        for (i, row) in a.row_iter().enumerate() {
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "constraint row {i} has no nonzero coefficient"
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// The whole space in dimension `n`.
    pub fn unconstrained(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
        }
    }

    /// `lower <= x_i <= upper` for every coordinate.
    pub fn box_bounds(n: usize, lower: f64, upper: f64) -> Self {
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = upper;
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lower;
        }
        Self { a, b }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.a.ncols()
    }

    /// Slack `b - A x`.
    pub fn slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }

    /// First row violated by more than `TAU_FEAS`, if any.
    pub fn first_violation(&self, x: &DVector<f64>) -> Option<(usize, f64)> {
        self.slack(x)
            .iter()
            .enumerate()
            .find(|(_, s)| **s < -TAU_FEAS)
            .map(|(i, s)| (i, -s))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.first_violation(x).is_none()
    }

    /// `{s : A s <= b - A x}` without checking that `x` is feasible.
    pub fn shifted_by(&self, x: &DVector<f64>) -> Polyhedron {
        Polyhedron {
            a: self.a.clone(),
            b: self.slack(x),
        }
    }

    /// Appends the row `a^T x <= b`.
    pub fn with_row(&self, row: &DVector<f64>, rhs: f64) -> Self {
        let m = self.rows();
        let n = self.dimension();
        let mut a = self.a.clone().resize_vertically(m + 1, 0.0);
        for j in 0..n {
            a[(m, j)] = row[j];
        }
        let mut b = self.b.clone().resize_vertically(m + 1, 0.0);
        b[m] = rhs;
        Self { a, b }
    }
}

/// The polyhedron of steps `{s : A s <= b - A x}` around a feasible `x`.
pub fn shifted_constraints(poly: &Polyhedron, x: &DVector<f64>) -> Result<Polyhedron> {
    if x.len() != poly.dimension() {
        return Err(Error::DimensionMismatch {
            expected: poly.dimension(),
            found: x.len(),
        });
    }
    if let Some((row, violation)) = poly.first_violation(x) {
        return Err(Error::InfeasiblePoint { row, violation });
    }
    Ok(poly.shifted_by(x))
}

/// Largest `t >= 0` with `A (x + t d) <= b`; infinite when no row limits `d`.
pub fn max_feasible_stretch(poly: &Polyhedron, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let slack = poly.slack(x);
    let rates = &poly.a * d;
    let mut t = f64::INFINITY;
    for (s, r) in slack.iter().zip(rates.iter()) {
        if *r > 0.0 {
            t = t.min((s / r).max(0.0));
        }
    }
    t
}

/// User-supplied analysis constants for an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub g_max: f64,
    #[serde(rename = "H_max")]
    pub h_max: f64,
    pub g_lip: f64,
    #[serde(rename = "H_lip")]
    pub h_lip: f64,
    /// Lower bound on the objective over the polyhedron.
    pub f_min: f64,
}

impl Estimates {
    fn validate(&self) -> Result<()> {
        let named = [
            ("g_max", self.g_max),
            ("H_max", self.h_max),
            ("g_lip", self.g_lip),
            ("H_lip", self.h_lip),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parse {
                    field: format!("estimates.{name}"),
                    message: format!("must be a positive finite number, got {v}"),
                });
            }
        }
        if !self.f_min.is_finite() {
            return Err(Error::Parse {
                field: "estimates.f_min".into(),
                message: "must be finite".into(),
            });
        }
        Ok(())
    }
}

/// A complete problem: objective, constraints, constants and start point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub objective: ObjectiveModel,
    pub polyhedron: Polyhedron,
    pub estimates: Estimates,
    pub start: DVector<f64>,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        objective: ObjectiveModel,
        polyhedron: Polyhedron,
        estimates: Estimates,
        start: DVector<f64>,
    ) -> Result<Self> {
        let n = objective.dimension;
        if polyhedron.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: polyhedron.dimension(),
            });
        }
        if start.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: start.len(),
            });
        }
        estimates.validate()?;
        if let Some((row, violation)) = polyhedron.first_violation(&start) {
            return Err(Error::InfeasiblePoint { row, violation });
        }
        Ok(Self {
            name: name.into(),
            objective,
            polyhedron,
            estimates,
            start,
        })
    }

    pub fn dimension(&self) -> usize {
        self.objective.dimension
    }

    /// Parses the JSON problem file format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        parse_instance(&root)
    }

    pub fn to_json_value(&self) -> Value {
        let n = self.dimension();
        let rows: Vec<Vec<f64>> = (0..self.polyhedron.rows())
            .map(|i| (0..n).map(|j| self.polyhedron.a[(i, j)]).collect())
            .collect();
        serde_json::json!({
            "name": self.name,
            "dimension": n,
            "objective": { "terms": self.objective.terms },
            "constraints": { "A": rows, "b": self.polyhedron.b.as_slice() },
            "estimates": self.estimates,
            "start": self.start.as_slice(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("instance serializes")
    }
}

fn parse_err(field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn get<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| parse_err(path, "missing field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| parse_err(path, format!("expected a number, got {v}")))?;
    if !x.is_finite() {
        return Err(parse_err(path, "number is not finite"));
    }
    Ok(x)
}

fn as_vec(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")))
        .collect()
}

fn parse_instance(root: &Value) -> Result<ProblemInstance> {
    let n = get(root, "dimension", "dimension")?
        .as_u64()
        .filter(|n| *n > 0)
        .ok_or_else(|| parse_err("dimension", "expected a positive integer"))? as usize;
    let name = root
        .get("name")
        .and_then(Value::as_str)
        .unwrap_or("unnamed")
        .to_string();

    let objective = get(root, "objective", "objective")?;
    let terms_v = get(objective, "terms", "objective.terms")?
        .as_array()
        .ok_or_else(|| parse_err("objective.terms", "expected an array"))?;
    let mut terms = Vec::with_capacity(terms_v.len());
    for (k, t) in terms_v.iter().enumerate() {
        let path = format!("objective.terms[{k}]");
        let coeff = as_f64(get(t, "coeff", &format!("{path}.coeff"))?, &format!("{path}.coeff"))?;
        let ex_path = format!("{path}.exponents");
        let ex_v = get(t, "exponents", &ex_path)?
            .as_array()
            .ok_or_else(|| parse_err(&ex_path, "expected an array of integers"))?;
        if ex_v.len() != n {
            return Err(parse_err(
                &ex_path,
                format!("expected {n} exponents, found {}", ex_v.len()),
            ));
        }
        let exponents = ex_v
            .iter()
            .map(|e| {
                e.as_u64()
                    .and_then(|e| u32::try_from(e).ok())
                    .ok_or_else(|| parse_err(&ex_path, "exponents must be non-negative integers"))
            })
            .collect::<Result<Vec<_>>>()?;
        terms.push(Monomial { coeff, exponents });
    }
    let objective = ObjectiveModel::new(n, terms)?;

    let polyhedron = match root.get("constraints") {
        None | Some(Value::Null) => Polyhedron::unconstrained(n),
        Some(c) => {
            let rows_v = get(c, "A", "constraints.A")?
                .as_array()
                .ok_or_else(|| parse_err("constraints.A", "expected an array of rows"))?;
            let b = as_vec(get(c, "b", "constraints.b")?, "constraints.b")?;
            if b.len() != rows_v.len() {
                return Err(parse_err(
                    "constraints.b",
                    format!("expected {} entries, found {}", rows_v.len(), b.len()),
                ));
            }
            let mut a = DMatrix::zeros(rows_v.len(), n);
            for (i, row) in rows_v.iter().enumerate() {
                let path = format!("constraints.A[{i}]");
                let row = as_vec(row, &path)?;
                if row.len() != n {
                    return Err(parse_err(&path, format!("expected {n} entries, found {}", row.len())));
                }
                if row.iter().all(|v| *v == 0.0) {
                    return Err(parse_err(&path, "row has no nonzero coefficient"));
                }
                for (j, v) in row.into_iter().enumerate() {
                    a[(i, j)] = v;
                }
            }
            Polyhedron::new(a, DVector::from_vec(b))?
        }
    };

    let est = get(root, "estimates", "estimates")?;
    let field = |k: &str| -> Result<f64> {
        let path = format!("estimates.{k}");
        as_f64(get(est, k, &path)?, &path)
    };
    let estimates = Estimates {
        g_max: field("g_max")?,
        h_max: field("H_max")?,
        g_lip: field("g_lip")?,
        h_lip: field("H_lip")?,
        f_min: field("f_min")?,
    };
    estimates.validate()?;

    let start = as_vec(get(root, "start", "start")?, "start")?;
    if start.len() != n {
        return Err(parse_err(
            "start",
            format!("expected {n} entries, found {}", start.len()),
        ));
    }
    let start = DVector::from_vec(start);
    if let Some((row, violation)) = polyhedron.first_violation(&start) {
        return Err(parse_err(
            "start",
            format!("infeasible: row {row} violated by {violation:.3e}"),
        ));
    }
    ProblemInstance::new(name, objective, polyhedron, estimates, start)
}
