use super::json::JVal;
use super::*;
use crate::diag::Diagnostic;

/// A parsed model plus warnings for unrecognized fields.
#[derive(Debug, Clone)]
pub struct ParsedIr {
    pub model: IrModel,
    pub warnings: Vec<Diagnostic>,
}

pub fn parse_ir(text: &str) -> Result<ParsedIr, IrError> {
    let root = JVal::parse(text).map_err(|e| IrError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    let model = parse_model(&root, &mut warnings)?;
    Ok(ParsedIr { model, warnings })
}

/// Parses a single constraint object, e.g. from a structural patch.
pub fn parse_constraint(
    value: &serde_json::Value,
    path: &str,
) -> Result<(ConstraintDef, Vec<Diagnostic>), IrError> {
    let mut warnings = Vec::new();
    let c = constraint(&JVal::from_value(value), path, &mut warnings)?;
    Ok((c, warnings))
}

pub fn parse_expr(value: &serde_json::Value, path: &str) -> Result<Expr, IrError> {
    expr(&JVal::from_value(value), path, &mut Vec::new())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IrError {
    IrError::Schema { path: path.into(), message: message.into() }
}

struct Fields<'a> {
    path: String,
    fields: &'a [(String, JVal)],
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    fn new(v: &'a JVal, path: &str) -> Result<Self, IrError> {
        let JVal::Obj(fields) = v else {
            return Err(schema(path, format!("expected an object, found {}", v.kind())));
        };
        for (i, (k, _)) in fields.iter().enumerate() {
            if fields[..i].iter().any(|(k2, _)| k2 == k) {
                return Err(IrError::DuplicateKey { path: path.to_string(), key: k.clone() });
            }
        }
        Ok(Fields { path: path.to_string(), fields, used: vec![false; fields.len()] })
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&mut self, key: &str) -> Option<&'a JVal> {
        let i = self.fields.iter().position(|(k, _)| k == key)?;
        self.used[i] = true;
        Some(&self.fields[i].1)
    }

    fn req(&mut self, key: &str) -> Result<&'a JVal, IrError> {
        self.get(key).ok_or_else(|| schema(self.path.clone(), format!("missing field {key:?}")))
    }

    fn req_str(&mut self, key: &str) -> Result<String, IrError> {
        match self.req(key)? {
            JVal::Str(s) => Ok(s.clone()),
            other => Err(schema(self.at(key), format!("expected a string, found {}", other.kind()))),
        }
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<String>, IrError> {
        match self.get(key) {
            None | Some(JVal::Null) => Ok(None),
            Some(JVal::Str(s)) => Ok(Some(s.clone())),
            Some(other) => {
                Err(schema(self.at(key), format!("expected a string or null, found {}", other.kind())))
            }
        }
    }

    fn opt_bool(&mut self, key: &str, default: bool) -> Result<bool, IrError> {
        match self.get(key) {
            None | Some(JVal::Null) => Ok(default),
            Some(JVal::Bool(b)) => Ok(*b),
            Some(other) => Err(schema(self.at(key), format!("expected a boolean, found {}", other.kind()))),
        }
    }

    /// `Ok(None)` when absent, `Ok(Some(None))` when null.
    fn opt_num(&mut self, key: &str) -> Result<Option<Option<f64>>, IrError> {
        match self.get(key) {
            None => Ok(None),
            Some(JVal::Null) => Ok(Some(None)),
            Some(v) => match v.as_f64() {
                Some(f) => Ok(Some(Some(f))),
                None => Err(schema(self.at(key), format!("expected a number, found {}", v.kind()))),
            },
        }
    }

    fn str_list(&mut self, key: &str) -> Result<Vec<String>, IrError> {
        let at = self.at(key);
        str_list(self.req(key)?, &at)
    }

    fn obj(&mut self, key: &str) -> Result<&'a [(String, JVal)], IrError> {
        let at = self.at(key);
        let v = self.req(key)?;
        // Checks the object shape and rejects repeated names.
        Ok(Fields::new(v, &at)?.fields)
    }

    fn finish(self, warnings: &mut Vec<Diagnostic>) {
        for ((k, _), used) in self.fields.iter().zip(&self.used) {
            if !used {
                warnings.push(Diagnostic::warning(
                    "unknown_field",
                    join(&self.path, k),
                    format!("unrecognized field {k:?} ignored"),
                ));
            }
        }
    }
}

fn str_list(v: &JVal, path: &str) -> Result<Vec<String>, IrError> {
    let JVal::Arr(items) = v else {
        return Err(schema(path, format!("expected an array of strings, found {}", v.kind())));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, it)| match it {
            JVal::Str(s) => Ok(s.clone()),
            other => Err(schema(format!("{path}[{i}]"), format!("expected a string, found {}", other.kind()))),
        })
        .collect()
}

fn parse_model(root: &JVal, w: &mut Vec<Diagnostic>) -> Result<IrModel, IrError> {
    let mut f = Fields::new(root, "")?;
    let problem_class = f.opt_str("problem_class")?.unwrap_or_default();
    let model_type = f.opt_str("model_type")?.unwrap_or_default();
    let top_sense = sense(f.req("sense")?, "sense")?;

    let mut sets = IndexMap::new();
    for (name, v) in f.obj("sets")? {
        sets.insert(name.clone(), set_def(v, &join("sets", name), w)?);
    }
    let mut parameters = IndexMap::new();
    for (name, v) in f.obj("parameters")? {
        parameters.insert(name.clone(), param_def(v, &join("parameters", name), w)?);
    }
    let mut variables = IndexMap::new();
    for (name, v) in f.obj("variables")? {
        variables.insert(name.clone(), var_def(v, &join("variables", name), w)?);
    }
    let mut constraints = IndexMap::new();
    for (name, v) in f.obj("constraints")? {
        constraints.insert(name.clone(), constraint(v, &join("constraints", name), w)?);
    }
    let objective = {
        let v = f.req("objective")?;
        let mut o = Fields::new(v, "objective")?;
        let s = sense(o.req("sense")?, "objective.sense")?;
        let e = expr(o.req("expression")?, "objective.expression", w)?;
        o.finish(w);
        ObjectiveDef { sense: s, expression: e }
    };
    f.finish(w);
    Ok(IrModel { problem_class, model_type, sense: top_sense, sets, parameters, variables, constraints, objective })
}

fn sense(v: &JVal, path: &str) -> Result<Sense, IrError> {
    match v.as_str() {
        Some("maximize") => Ok(Sense::Maximize),
        Some("minimize") => Ok(Sense::Minimize),
        _ => Err(schema(path, "expected \"maximize\" or \"minimize\"")),
    }
}

fn set_def(v: &JVal, path: &str, w: &mut Vec<Diagnostic>) -> Result<SetDef, IrError> {
    let mut f = Fields::new(v, path)?;
    let size = match f.get("size") {
        None | Some(JVal::Null) => None,
        Some(JVal::Int(n)) if *n >= 0 => Some(*n as u64),
        Some(_) => return Err(schema(f.at("size"), "expected a non-negative integer or null")),
    };
    let d = SetDef {
        size,
        index_symbol: f.req_str("index_symbol")?,
        source: f.req_str("source")?,
        column: f.req_str("column")?,
        filter_column: f.opt_str("filter_column")?,
        filter_value: f.opt_str("filter_value")?,
        ordered: f.opt_bool("ordered", false)?,
    };
    f.finish(w);
    Ok(d)
}

fn param_def(v: &JVal, path: &str, w: &mut Vec<Diagnostic>) -> Result<ParamDef, IrError> {
    let mut f = Fields::new(v, path)?;
    let domain = f.str_list("domain")?;
    let ty = match f.req_str("type")?.as_str() {
        "float" => ParamType::Float,
        "int" => ParamType::Int,
        other => return Err(schema(f.at("type"), format!("unknown parameter type {other:?}"))),
    };
    let source = f.req_str("source")?;
    let column = f.req_str("column")?;
    let index_columns = match f.get("index_columns") {
        None | Some(JVal::Null) => None,
        Some(v) => Some(str_list(v, &f.at("index_columns"))?),
    };
    let missing_default = match f.req_str("missing_default")?.as_str() {
        "zero" => MissingDefault::Zero,
        "inf" => MissingDefault::Inf,
        other => {
            return Err(schema(f.at("missing_default"), format!("expected \"zero\" or \"inf\", found {other:?}")))
        }
    };
    let optional = f.opt_bool("optional", false)?;
    f.finish(w);
    Ok(ParamDef { domain, ty, source, column, index_columns, missing_default, optional })
}

fn var_def(v: &JVal, path: &str, w: &mut Vec<Diagnostic>) -> Result<VarDef, IrError> {
    let mut f = Fields::new(v, path)?;
    let description = f.opt_str("description")?;
    let label = f.opt_str("label")?;
    let domain = f.str_list("domain")?;
    let ty = match f.req_str("type")?.as_str() {
        "continuous" => VarType::Continuous,
        "binary" => VarType::Binary,
        other => return Err(schema(f.at("type"), format!("unknown variable type {other:?}"))),
    };
    let lower_bound = f.opt_num("lower_bound")?.unwrap_or(Some(0.0));
    let upper_bound = f.opt_num("upper_bound")?.unwrap_or(match ty {
        VarType::Binary => Some(1.0),
        VarType::Continuous => None,
    });
    let domain_filter = f.opt_str("domain_filter")?;
    let exclude_diagonal = f.opt_bool("exclude_diagonal", false)?;
    let upper_bound_set = f.opt_str("upper_bound_set")?;
    let mut fixings = Vec::new();
    match f.get("fixings") {
        None | Some(JVal::Null) => {}
        Some(JVal::Arr(items)) => {
            for (i, it) in items.iter().enumerate() {
                let p = format!("{}[{i}]", f.at("fixings"));
                let mut g = Fields::new(it, &p)?;
                let key = g.str_list("key")?;
                let value = match g.opt_num("value")? {
                    Some(Some(x)) => x,
                    _ => return Err(schema(g.at("value"), "expected a number")),
                };
                g.finish(w);
                fixings.push(Fixing { key, value });
            }
        }
        Some(other) => return Err(schema(f.at("fixings"), format!("expected an array, found {}", other.kind()))),
    }
    f.finish(w);
    Ok(VarDef {
        description,
        label,
        domain,
        ty,
        lower_bound,
        upper_bound,
        domain_filter,
        exclude_diagonal,
        upper_bound_set,
        fixings,
    })
}

fn constraint(v: &JVal, path: &str, w: &mut Vec<Diagnostic>) -> Result<ConstraintDef, IrError> {
    let mut f = Fields::new(v, path)?;
    let domain = f.str_list("domain")?;
    let expression = expr(f.req("expression")?, &f.at("expression"), w)?;
    let sense_s = f.req_str("sense")?;
    let sense = RowSense::parse(&sense_s)
        .ok_or_else(|| schema(f.at("sense"), format!("unknown constraint sense {sense_s:?}")))?;
    let rhs = expr(f.req("rhs")?, &f.at("rhs"), w)?;
    let sparse_filter = f.opt_str("sparse_filter")?;
    f.finish(w);
    Ok(ConstraintDef { domain, expression, sense, rhs, sparse_filter })
}

fn tokens(f: &mut Fields) -> Result<Vec<IndexToken>, IrError> {
    let at = f.at("indices");
    let raw = str_list(f.req("indices")?, &at)?;
    raw.iter()
        .enumerate()
        .map(|(i, s)| {
            IndexToken::parse(s).ok_or_else(|| IrError::Token { path: format!("{at}[{i}]"), token: s.clone() })
        })
        .collect()
}

fn expr(v: &JVal, path: &str, w: &mut Vec<Diagnostic>) -> Result<Expr, IrError> {
    let mut f = Fields::new(v, path)?;
    let e = if let Some(op) = f.get("operation") {
        match op.as_str() {
            Some("indexed_sum") => {
                let over = f.str_list("over")?;
                let body = expr(f.req("body")?, &f.at("body"), w)?;
                Expr::IndexedSum { over, body: Box::new(body) }
            }
            Some(name @ ("sum" | "subtract" | "multiply")) => {
                let op = match name {
                    "sum" => BinOp::Sum,
                    "subtract" => BinOp::Subtract,
                    _ => BinOp::Multiply,
                };
                let left = expr(f.req("left")?, &f.at("left"), w)?;
                let right = expr(f.req("right")?, &f.at("right"), w)?;
                Expr::binary(op, left, right)
            }
            _ => return Err(schema(f.at("operation"), format!("unknown operation {op:?}"))),
        }
    } else if let Some(ty) = f.get("type") {
        match ty.as_str() {
            Some("variable") => {
                let name = f.req_str("name")?;
                let indices = tokens(&mut f)?;
                let lag = match f.get("lag") {
                    None | Some(JVal::Null) => None,
                    Some(JVal::Int(k)) => Some(*k),
                    Some(_) => return Err(schema(f.at("lag"), "expected an integer")),
                };
                Expr::Var(VarRef { name, indices, lag })
            }
            Some("parameter") => {
                let name = f.req_str("name")?;
                let indices = tokens(&mut f)?;
                Expr::Param(ParamRef { name, indices })
            }
            Some("constant") => match f.opt_num("value")? {
                Some(Some(x)) => Expr::Const(x),
                _ => return Err(schema(f.at("value"), "expected a number")),
            },
            _ => return Err(schema(f.at("type"), format!("unknown node type {ty:?}"))),
        }
    } else {
        return Err(schema(path, "expression node needs an \"operation\" or a \"type\""));
    };
    f.finish(w);
    Ok(e)
}
