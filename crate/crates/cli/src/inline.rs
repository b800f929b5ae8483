//! Build dynamical systems and gauge functions from config expressions.

use anyhow::{anyhow, Context as _, Result};
use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use nalgebra::DVector;
use normform_core::groups::StateTransformationFamily;
use normform_core::{DynamicalSystem, Interval};

use crate::config::{FamilyDef, InlineSystem};

type Expr = Node<DefaultNumericTypes>;

fn parse(expr: &str) -> Result<Expr> {
    build_operator_tree::<DefaultNumericTypes>(expr)
        .map_err(|e| anyhow!("cannot parse expression '{expr}': {e}"))
}

fn eval(expr: &Expr, names: &[String], x: &DVector<f64>, u: Option<f64>) -> f64 {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (name, value) in names.iter().zip(x.iter()) {
        ctx.set_value(name.clone(), Value::from_float(*value))
            .expect("fresh context");
    }
    if let Some(u) = u {
        ctx.set_value("u".into(), Value::from_float(u))
            .expect("fresh context");
    }
    expr.eval_number_with_context(&ctx).unwrap_or(f64::NAN)
}

/// Compile an inline definition into a [`DynamicalSystem`].
pub fn build_system(def: &InlineSystem) -> Result<DynamicalSystem> {
    let names: Vec<String> = def.states.iter().map(|s| s.name.clone()).collect();
    let domain: Vec<Interval> = def
        .states
        .iter()
        .map(|s| if s.positive { Interval::POSITIVE } else { Interval::REAL })
        .collect();
    let rhs: Vec<Expr> = def
        .equations
        .iter()
        .map(|e| parse(e))
        .collect::<Result<_>>()
        .context("in the equations")?;
    let output = parse(&def.output).context("in the output")?;
    let names_f = names.clone();
    let names_h = names;
    let dim = def.states.len();
    Ok(DynamicalSystem::new(
        "inline system",
        dim,
        domain,
        move |x, u| {
            DVector::from_iterator(dim, rhs.iter().map(|e| eval(e, &names_f, x, Some(u))))
        },
        move |x| eval(&output, &names_h, x, None),
    ))
}

/// Compile a scaled-components family definition against an inline system.
pub fn build_family(def: &FamilyDef, sys: &InlineSystem) -> Result<StateTransformationFamily> {
    let mut mask = vec![false; sys.states.len()];
    for name in &def.scaled {
        let idx = sys
            .states
            .iter()
            .position(|s| &s.name == name)
            .ok_or_else(|| anyhow!("family scales unknown state '{name}'"))?;
        mask[idx] = true;
    }
    Ok(StateTransformationFamily::scaling_mask(sys.states.len(), &mask))
}

/// Compile a gauge expression in the variables `z1 .. zm`.
pub fn build_gauge(expr: &str, dim_z: usize) -> Result<impl Fn(&DVector<f64>) -> f64 + Send + Sync> {
    let node = parse(expr).context("in the gauge expression")?;
    let names: Vec<String> = (1..=dim_z).map(|i| format!("z{i}")).collect();
    Ok(move |z: &DVector<f64>| eval(&node, &names, z, None))
}
