//! CSV table store and materialization of sets and parameters.
//!
//! Cells are stored verbatim. Index cells are trimmed and matched to set
//! elements as strings; `"01"` and `"1"` are different elements.

use crate::diag::Diagnostic;
use crate::ir::{MissingDefault, ParamDef, ParamType, SetDef};
use crate::keyed::KeyTable;
use indexmap::IndexMap;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:{line}: {message}")]
    Csv { file: String, line: u64, message: String },
    #[error("table {table:?} not found")]
    MissingTable { table: String },
    #[error("table {table:?} has no column {column:?}")]
    MissingColumn { table: String, column: String },
    #[error("set {set:?} lists element {element:?} twice")]
    DuplicateElement { set: String, element: String },
    #[error("{table}:{line}: cannot parse {cell:?} in column {column:?} as a number")]
    Parse { table: String, line: u64, column: String, cell: String },
    #[error("parameter {param:?} has two rows for key {key:?}")]
    DuplicateKey { param: String, key: Vec<String> },
    #[error("parameter {param:?} row key {key:?} names an element outside its domain")]
    UnknownIndexElement { param: String, key: Vec<String> },
    #[error("scalar parameter {param:?} needs exactly one row, found {rows}")]
    ScalarCardinality { param: String, rows: usize },
}

/// One CSV file: header plus rows of raw cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Table {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        Table { columns, rows }
    }

    /// Builds a table from string slices; handy for tests and generators.
    pub fn from_rows(columns: &[&str], rows: &[Vec<String>]) -> Table {
        Table::new(columns.iter().map(|c| c.to_string()).collect(), rows.to_vec())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let io = |e: csv::Error| DataError::Io { path: path.to_path_buf(), source: e.into() };
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io)?;
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn read_csv(path: &Path) -> Result<Table, DataError> {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(|e| csv_error(&file, e))?;
        let columns: Vec<String> = r.headers().map_err(|e| csv_error(&file, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(&file, e))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { columns, rows })
    }
}

fn csv_error(file: &str, e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("row has {len} fields, header has {expected_len}")
        }
        _ => e.to_string(),
    };
    DataError::Csv { file: file.to_string(), line, message }
}

/// Tables keyed by filename stem. Clones share table storage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataStore {
    tables: BTreeMap<String, Arc<Table>>,
}

/// `"demand.csv"` and `"demand"` both name the table `demand`.
pub fn table_stem(source: &str) -> &str {
    source.strip_suffix(".csv").unwrap_or(source)
}

impl DataStore {
    pub fn new() -> DataStore {
        DataStore::default()
    }

    /// Reads every `*.csv` file in `dir`.
    pub fn load_tables(dir: &Path) -> Result<DataStore, DataError> {
        let io = |e| DataError::Io { path: dir.to_path_buf(), source: e };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.is_file())
            .collect();
        paths.sort();
        let mut store = DataStore::new();
        for p in paths {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            store.insert(stem, Table::read_csv(&p)?);
        }
        Ok(store)
    }

    pub fn write_tables(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::Io { path: dir.to_path_buf(), source: e })?;
        for (name, t) in &self.tables {
            t.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }

    pub fn insert(&mut self, name: impl Into<String>, table: Table) {
        self.tables.insert(name.into(), Arc::new(table));
    }

    pub fn get(&self, source: &str) -> Option<&Table> {
        self.tables.get(table_stem(source)).map(|t| &**t)
    }

    /// Copy-on-write access; other clones of the store keep the old table.
    pub fn get_mut(&mut self, source: &str) -> Option<&mut Table> {
        self.tables.get_mut(table_stem(source)).map(Arc::make_mut)
    }

    pub fn shares_table_with(&self, other: &DataStore, source: &str) -> bool {
        match (self.tables.get(table_stem(source)), other.tables.get(table_stem(source))) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

/// A set resolved against data: elements in row order.
#[derive(Debug, Clone)]
pub struct SetInstance {
    pub name: String,
    pub ordered: bool,
    pub elements: Vec<String>,
    position: HashMap<String, u32>,
}

impl SetInstance {
    pub fn new(name: &str, ordered: bool, elements: Vec<String>) -> Result<SetInstance, DataError> {
        let mut position = HashMap::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            if position.insert(e.clone(), i as u32).is_some() {
                return Err(DataError::DuplicateElement { set: name.to_string(), element: e.clone() });
            }
        }
        Ok(SetInstance { name: name.to_string(), ordered, elements, position })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, element: &str) -> Option<u32> {
        self.position.get(element).copied()
    }
}

pub fn materialize_set(name: &str, def: &SetDef, store: &DataStore) -> Result<(SetInstance, Vec<Diagnostic>), DataError> {
    let table = store.get(&def.source).ok_or_else(|| DataError::MissingTable { table: def.source.clone() })?;
    let col = |c: &str| {
        table.column_index(c).ok_or_else(|| DataError::MissingColumn { table: def.source.clone(), column: c.to_string() })
    };
    let value_col = col(&def.column)?;
    let filter = match (&def.filter_column, &def.filter_value) {
        (Some(c), Some(v)) => Some((col(c)?, v.as_str())),
        _ => None,
    };
    let elements: Vec<String> = table
        .rows
        .iter()
        .filter(|r| filter.is_none_or(|(fc, fv)| r[fc].trim() == fv))
        .map(|r| r[value_col].trim().to_string())
        .collect();
    let mut warnings = Vec::new();
    let path = format!("sets.{name}");
    if elements.is_empty() {
        warnings.push(Diagnostic::warning("empty_set", &path, "set has no elements"));
    }
    if let Some(size) = def.size {
        if size as usize != elements.len() {
            warnings.push(Diagnostic::warning(
                "size_mismatch",
                &path,
                format!("declared size {size}, data has {} elements", elements.len()),
            ));
        }
    }
    Ok((SetInstance::new(name, def.ordered, elements)?, warnings))
}

/// Result of a parameter lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup {
    Value(f64),
    DefaultZero,
    DefaultInf,
}

impl Lookup {
    /// The value with `DefaultInf` as `+inf`.
    pub fn as_f64(self) -> f64 {
        match self {
            Lookup::Value(v) => v,
            Lookup::DefaultZero => 0.0,
            Lookup::DefaultInf => f64::INFINITY,
        }
    }
}

/// A parameter resolved against data; keys are element positions.
#[derive(Debug, Clone)]
pub struct ParamInstance {
    pub name: String,
    pub default: MissingDefault,
    pub(crate) sets: Vec<Arc<SetInstance>>,
    table: KeyTable<f64>,
}

impl ParamInstance {
    pub fn arity(&self) -> usize {
        self.sets.len()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    pub(crate) fn get_pos(&self, key: &[u32]) -> Option<f64> {
        self.table.get(key)
    }

    pub(crate) fn lookup_pos(&self, key: &[u32]) -> Lookup {
        match self.table.get(key) {
            Some(v) => Lookup::Value(v),
            None => match self.default {
                MissingDefault::Zero => Lookup::DefaultZero,
                MissingDefault::Inf => Lookup::DefaultInf,
            },
        }
    }

    /// Looks up by element strings.
    pub fn lookup(&self, key: &[&str]) -> Result<Lookup, DataError> {
        let pos = self.positions(key)?;
        Ok(self.lookup_pos(&pos))
    }

    /// True if the table has an entry for the key (regardless of value).
    pub fn contains(&self, key: &[&str]) -> bool {
        self.positions(key).is_ok_and(|p| self.table.contains(&p))
    }

    fn positions(&self, key: &[&str]) -> Result<Vec<u32>, DataError> {
        let bad = || DataError::UnknownIndexElement {
            param: self.name.clone(),
            key: key.iter().map(|s| s.to_string()).collect(),
        };
        if key.len() != self.sets.len() {
            return Err(bad());
        }
        key.iter().zip(&self.sets).map(|(k, s)| s.position(k).ok_or_else(bad)).collect()
    }
}

pub(crate) fn parse_number(cell: &str, ty: ParamType) -> Option<f64> {
    let c = cell.trim();
    let v = match ty {
        ParamType::Float => c.parse::<f64>().ok()?,
        ParamType::Int => c.parse::<i64>().ok()? as f64,
    };
    v.is_finite().then_some(v)
}

pub fn materialize_param(
    name: &str,
    def: &ParamDef,
    sets: &IndexMap<String, Arc<SetInstance>>,
    store: &DataStore,
) -> Result<ParamInstance, DataError> {
    let dom: Vec<Arc<SetInstance>> = def
        .domain
        .iter()
        .map(|s| sets.get(s).cloned().ok_or_else(|| DataError::MissingTable { table: s.clone() }))
        .collect::<Result<_, _>>()?;
    let dims: Vec<usize> = dom.iter().map(|s| s.len()).collect();
    let mut out = ParamInstance {
        name: name.to_string(),
        default: def.missing_default,
        sets: dom,
        table: KeyTable::new(&dims),
    };
    let Some(table) = store.get(&def.source) else {
        if def.optional {
            return Ok(out);
        }
        return Err(DataError::MissingTable { table: def.source.clone() });
    };
    let col = |c: &str| {
        table.column_index(c).ok_or_else(|| DataError::MissingColumn { table: def.source.clone(), column: c.to_string() })
    };
    let value_col = col(&def.column)?;
    let parse = |row: usize, cell: &str| {
        parse_number(cell, def.ty).ok_or_else(|| DataError::Parse {
            table: def.source.clone(),
            line: row as u64 + 2,
            column: def.column.clone(),
            cell: cell.to_string(),
        })
    };

    if def.domain.is_empty() {
        if table.rows.len() != 1 {
            return Err(DataError::ScalarCardinality { param: name.to_string(), rows: table.rows.len() });
        }
        let v = parse(0, &table.rows[0][value_col])?;
        out.table.insert(&[], v);
        return Ok(out);
    }

    let index_cols: Vec<usize> =
        def.index_columns.as_deref().unwrap_or_default().iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let mut key = vec![0u32; index_cols.len()];
    for (r, row) in table.rows.iter().enumerate() {
        for (k, (&c, s)) in index_cols.iter().zip(&out.sets).enumerate() {
            match s.position(row[c].trim()) {
                Some(p) => key[k] = p,
                None => {
                    return Err(DataError::UnknownIndexElement {
                        param: name.to_string(),
                        key: index_cols.iter().map(|&c| row[c].trim().to_string()).collect(),
                    })
                }
            }
        }
        let v = parse(r, &row[value_col])?;
        if out.table.insert(&key, v).is_some() {
            return Err(DataError::DuplicateKey {
                param: name.to_string(),
                key: index_cols.iter().map(|&c| row[c].trim().to_string()).collect(),
            });
        }
    }
    Ok(out)
}
