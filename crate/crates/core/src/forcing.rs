//! Scalar fields of `(t, x, z)` given as expression strings or tables.
//!
//! Expressions use `evalexpr` syntax. Variables: `t`, `x`, `z`, `pi`, and
//! the parameters supplied at compile time. Functions: `sin cos tan exp ln
//! sqrt abs sinh cosh tanh` (one argument) and `pow min max` (two); the
//! `math::` builtins also work.

use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value,
};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};

type V = Value<DefaultNumericTypes>;

/// Variable slots: t, x, z, pi.
struct PointContext<'a> {
    vals: [V; 4],
    params: &'a [(String, V)],
}

impl Context for PointContext<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, id: &str) -> Option<&V> {
        match id {
            "t" => Some(&self.vals[0]),
            "x" => Some(&self.vals[1]),
            "z" => Some(&self.vals[2]),
            "pi" => Some(&self.vals[3]),
            _ => self.params.iter().find(|(k, _)| k == id).map(|(_, v)| v),
        }
    }

    fn call_function(&self, id: &str, arg: &V) -> EvalexprResult<V, DefaultNumericTypes> {
        let one = |f: fn(f64) -> f64| -> EvalexprResult<V, DefaultNumericTypes> { Ok(V::Float(f(arg.as_number()?))) };
        let two = |f: fn(f64, f64) -> f64| -> EvalexprResult<V, DefaultNumericTypes> {
            let t = arg.as_fixed_len_tuple(2)?;
            Ok(V::Float(f(t[0].as_number()?, t[1].as_number()?)))
        };
        match id {
            "sin" => one(f64::sin),
            "cos" => one(f64::cos),
            "tan" => one(f64::tan),
            "exp" => one(f64::exp),
            "ln" => one(f64::ln),
            "sqrt" => one(f64::sqrt),
            "abs" => one(f64::abs),
            "sinh" => one(f64::sinh),
            "cosh" => one(f64::cosh),
            "tanh" => one(f64::tanh),
            "pow" => two(f64::powf),
            "min" => two(f64::min),
            "max" => two(f64::max),
            _ => Err(EvalexprError::FunctionIdentifierNotFound(id.to_string())),
        }
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Ok(())
    }
}

/// A compiled scalar expression.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    tree: Node<DefaultNumericTypes>,
    params: Vec<(String, V)>,
}

impl Expr {
    pub fn compile(source: &str) -> Result<Self> {
        Self::with_params(source, &[])
    }

    pub fn with_params(source: &str, params: &[(&str, f64)]) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| Error::Expression {
            expr: source.to_string(),
            message: e.to_string(),
        })?;
        let e = Self {
            source: source.to_string(),
            tree,
            params: params.iter().map(|(k, v)| (k.to_string(), V::Float(*v))).collect(),
        };
        // surface unknown identifiers at compile time
        e.try_eval(0.0, 0.5, 0.5)?;
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn try_eval(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        let ctx = PointContext {
            vals: [V::Float(t), V::Float(x), V::Float(z), V::Float(std::f64::consts::PI)],
            params: &self.params,
        };
        self.tree.eval_number_with_context(&ctx).map_err(|e| Error::Expression {
            expr: self.source.clone(),
            message: e.to_string(),
        })
    }

    /// Evaluation for an expression that already compiled and evaluated
    /// once; arithmetic failures at other points yield NaN.
    pub fn eval(&self, t: f64, x: f64, z: f64) -> f64 {
        self.try_eval(t, x, z).unwrap_or(f64::NAN)
    }
}

/// Piecewise-linear table in `x`, optionally scaled by a time expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
}

impl Table {
    fn interpolate(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.values[0];
        }
        if x >= self.x[n - 1] {
            return self.values[n - 1];
        }
        let i = self.x.partition_point(|&p| p <= x) - 1;
        let s = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }
}

#[derive(Debug, Clone)]
pub enum ScalarField {
    Zero,
    Constant(f64),
    Expression(Expr),
    Tabulated(Table, Option<Expr>),
}

impl ScalarField {
    pub fn from_json(v: &Json, field: &str) -> Result<Self> {
        match v {
            Json::Null => Ok(Self::Zero),
            Json::Number(n) => {
                let c = n.as_f64().unwrap_or(0.0);
                Ok(if c == 0.0 { Self::Zero } else { Self::Constant(c) })
            }
            Json::String(s) => {
                let e = Expr::compile(s)?;
                Ok(Self::Expression(e))
            }
            Json::Object(_) => {
                let t: Table = serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("{field}: {e}")))?;
                if t.x.len() < 2 || t.x.len() != t.values.len() || t.x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(format!(
                        "{field}: table needs ≥ 2 strictly increasing x with matching values"
                    )));
                }
                let time = t.time.as_deref().map(Expr::compile).transpose()?;
                Ok(Self::Tabulated(t, time))
            }
            _ => Err(Error::Config(format!("{field}: expected number, expression string or table"))),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Self::Zero => Json::from(0.0),
            Self::Constant(c) => Json::from(*c),
            Self::Expression(e) => Json::from(e.source()),
            Self::Tabulated(t, _) => serde_json::to_value(t).unwrap_or(Json::Null),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// The field multiplied by a constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c == 0.0 {
            return Ok(Self::Zero);
        }
        Ok(match self {
            Self::Zero => Self::Zero,
            Self::Constant(v) => Self::Constant(c * v),
            Self::Expression(e) => {
                let params: Vec<(&str, f64)> = e
                    .params
                    .iter()
                    .map(|(k, v)| (k.as_str(), v.as_number().unwrap_or(0.0)))
                    .collect();
                Self::Expression(Expr::with_params(&format!("({}) * {c:?}", e.source), &params)?)
            }
            Self::Tabulated(t, time) => {
                let mut t = t.clone();
                t.values.iter_mut().for_each(|v| *v *= c);
                Self::Tabulated(t, time.clone())
            }
        })
    }

    pub fn eval(&self, t: f64, x: f64, z: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Expression(e) => e.eval(t, x, z),
            Self::Tabulated(tab, time) => tab.interpolate(x) * time.as_ref().map_or(1.0, |e| e.eval(t, x, z)),
        }
    }
}

/// Two-component vector field for the slice (horizontal, vertical).
#[derive(Debug, Clone)]
pub struct VectorField(pub [ScalarField; 2]);

impl VectorField {
    pub fn zero() -> Self {
        Self([ScalarField::Zero, ScalarField::Zero])
    }

    pub fn from_json(v: Option<&Json>, field: &str) -> Result<Self> {
        match v {
            None | Some(Json::Null) => Ok(Self::zero()),
            Some(Json::Array(a)) if a.len() == 2 => Ok(Self([
                ScalarField::from_json(&a[0], field)?,
                ScalarField::from_json(&a[1], field)?,
            ])),
            Some(_) => Err(Error::Config(format!("{field}: expected a two-component array"))),
        }
    }

    pub fn to_json(&self) -> Json {
        Json::Array(vec![self.0[0].to_json(), self.0[1].to_json()])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(ScalarField::is_zero)
    }

    pub fn eval(&self, t: f64, x: f64, z: f64) -> [f64; 2] {
        [self.0[0].eval(t, x, z), self.0[1].eval(t, x, z)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_with_functions_and_params() {
        let e = Expr::with_params("a * sin(pi * x) + pow(t, 2)", &[("a", 2.0)]).unwrap();
        assert!((e.eval(3.0, 0.5, 0.0) - 11.0).abs() < 1e-14);
        let m = Expr::compile("math::cos(0.0) + z").unwrap();
        assert_eq!(m.eval(0.0, 0.0, 2.0), 3.0);
    }

    #[test]
    fn scaling_preserves_kind() {
        let e = ScalarField::Expression(Expr::compile("x + 1").unwrap()).scaled(0.25).unwrap();
        assert_eq!(e.eval(0.0, 3.0, 0.0), 1.0);
        assert!(ScalarField::Constant(2.0).scaled(0.0).unwrap().is_zero());
    }

    #[test]
    fn integer_literals_are_numbers() {
        assert_eq!(Expr::compile("2 * 3").unwrap().eval(0.0, 0.0, 0.0), 6.0);
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let err = Expr::compile("foo + 1").unwrap_err();
        assert!(matches!(err, Error::Expression { .. }), "{err}");
    }

    #[test]
    fn table_interpolates_and_scales() {
        let j = serde_json::json!({"x": [0.0, 1.0, 2.0], "values": [0.0, 2.0, 0.0], "time": "t"});
        let f = ScalarField::from_json(&j, "g").unwrap();
        assert!((f.eval(0.5, 0.25, 0.0) - 0.25).abs() < 1e-15);
        assert_eq!(f.eval(1.0, 5.0, 0.0), 0.0);
        let bad = serde_json::json!({"x": [0.0], "values": [1.0]});
        assert!(ScalarField::from_json(&bad, "g").is_err());
    }
}
