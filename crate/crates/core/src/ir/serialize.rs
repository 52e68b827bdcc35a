use super::*;
use serde_json::{json, Map, Value};

pub fn serialize_ir(model: &IrModel) -> String {
    serde_json::to_string_pretty(&ir_to_value(model)).expect("IR values are always serializable")
}

fn num(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        json!(x as i64)
    } else {
        serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn opt_str(x: &Option<String>) -> Value {
    x.as_ref().map(|s| Value::String(s.clone())).unwrap_or(Value::Null)
}

pub fn ir_to_value(m: &IrModel) -> Value {
    let mut root = Map::new();
    root.insert("problem_class".into(), json!(m.problem_class));
    root.insert("model_type".into(), json!(m.model_type));
    root.insert("sense".into(), json!(m.sense.as_str()));

    let mut sets = Map::new();
    for (name, s) in &m.sets {
        let mut o = Map::new();
        o.insert("size".into(), s.size.map(|n| json!(n)).unwrap_or(Value::Null));
        o.insert("index_symbol".into(), json!(s.index_symbol));
        o.insert("source".into(), json!(s.source));
        o.insert("column".into(), json!(s.column));
        o.insert("filter_column".into(), opt_str(&s.filter_column));
        o.insert("filter_value".into(), opt_str(&s.filter_value));
        o.insert("ordered".into(), json!(s.ordered));
        sets.insert(name.clone(), Value::Object(o));
    }
    root.insert("sets".into(), Value::Object(sets));

    let mut params = Map::new();
    for (name, p) in &m.parameters {
        let mut o = Map::new();
        o.insert("domain".into(), json!(p.domain));
        o.insert(
            "type".into(),
            json!(match p.ty {
                ParamType::Float => "float",
                ParamType::Int => "int",
            }),
        );
        o.insert("source".into(), json!(p.source));
        o.insert("column".into(), json!(p.column));
        o.insert("index_columns".into(), p.index_columns.as_ref().map(|c| json!(c)).unwrap_or(Value::Null));
        o.insert(
            "missing_default".into(),
            json!(match p.missing_default {
                MissingDefault::Zero => "zero",
                MissingDefault::Inf => "inf",
            }),
        );
        if p.optional {
            o.insert("optional".into(), json!(true));
        }
        params.insert(name.clone(), Value::Object(o));
    }
    root.insert("parameters".into(), Value::Object(params));

    let mut vars = Map::new();
    for (name, v) in &m.variables {
        let mut o = Map::new();
        if let Some(d) = &v.description {
            o.insert("description".into(), json!(d));
        }
        if let Some(l) = &v.label {
            o.insert("label".into(), json!(l));
        }
        o.insert("domain".into(), json!(v.domain));
        o.insert(
            "type".into(),
            json!(match v.ty {
                VarType::Continuous => "continuous",
                VarType::Binary => "binary",
            }),
        );
        o.insert("lower_bound".into(), opt_num(v.lower_bound));
        o.insert("upper_bound".into(), opt_num(v.upper_bound));
        if v.upper_bound_set.is_some() {
            o.insert("upper_bound_set".into(), opt_str(&v.upper_bound_set));
        }
        if v.exclude_diagonal {
            o.insert("exclude_diagonal".into(), json!(true));
        }
        o.insert("domain_filter".into(), opt_str(&v.domain_filter));
        if !v.fixings.is_empty() {
            let fx: Vec<Value> =
                v.fixings.iter().map(|f| json!({"key": f.key, "value": num(f.value)})).collect();
            o.insert("fixings".into(), Value::Array(fx));
        }
        vars.insert(name.clone(), Value::Object(o));
    }
    root.insert("variables".into(), Value::Object(vars));

    let mut cons = Map::new();
    for (name, c) in &m.constraints {
        cons.insert(name.clone(), constraint_to_value(c));
    }
    root.insert("constraints".into(), Value::Object(cons));

    let mut obj = Map::new();
    obj.insert("sense".into(), json!(m.objective.sense.as_str()));
    obj.insert("expression".into(), expr_to_value(&m.objective.expression));
    root.insert("objective".into(), Value::Object(obj));
    Value::Object(root)
}

pub fn constraint_to_value(c: &ConstraintDef) -> Value {
    let mut o = Map::new();
    o.insert("domain".into(), json!(c.domain));
    o.insert("expression".into(), expr_to_value(&c.expression));
    o.insert("sense".into(), json!(c.sense.as_str()));
    o.insert("rhs".into(), expr_to_value(&c.rhs));
    if let Some(f) = &c.sparse_filter {
        o.insert("sparse_filter".into(), json!(f));
    }
    Value::Object(o)
}

pub fn expr_to_value(e: &Expr) -> Value {
    let mut o = Map::new();
    match e {
        Expr::IndexedSum { over, body } => {
            o.insert("operation".into(), json!("indexed_sum"));
            o.insert("over".into(), json!(over));
            o.insert("body".into(), expr_to_value(body));
        }
        Expr::Binary { op, left, right } => {
            o.insert("operation".into(), json!(op.as_str()));
            o.insert("left".into(), expr_to_value(left));
            o.insert("right".into(), expr_to_value(right));
        }
        Expr::Var(v) => {
            o.insert("type".into(), json!("variable"));
            o.insert("name".into(), json!(v.name));
            o.insert("indices".into(), tokens(&v.indices));
            if let Some(l) = v.lag {
                o.insert("lag".into(), json!(l));
            }
        }
        Expr::Param(p) => {
            o.insert("type".into(), json!("parameter"));
            o.insert("name".into(), json!(p.name));
            o.insert("indices".into(), tokens(&p.indices));
        }
        Expr::Const(x) => {
            o.insert("type".into(), json!("constant"));
            o.insert("value".into(), num(*x));
        }
    }
    Value::Object(o)
}

fn tokens(t: &[IndexToken]) -> Value {
    Value::Array(t.iter().map(|t| Value::String(t.to_string())).collect())
}
