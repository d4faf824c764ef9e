//! Named datasets loaded from JSON.
//!
//! A dataset file is a JSON object whose values are numbers, flat arrays of
//! numbers, or arrays of equal-length arrays (row-major matrices). Entries
//! written without a fractional part or exponent keep integer type.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::DataError;

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Int(i64),
    Real(f64),
    IntArray(Vec<i64>),
    RealArray(Vec<f64>),
    IntMatrix(Matrix<i64>),
    RealMatrix(Matrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

impl Entry {
    fn type_name(&self) -> &'static str {
        match self {
            Entry::Int(_) => "int",
            Entry::Real(_) => "real",
            Entry::IntArray(_) => "int array",
            Entry::RealArray(_) => "real array",
            Entry::IntMatrix(_) => "int matrix",
            Entry::RealMatrix(_) => "real matrix",
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Entry::Int(v) => Value::from(*v),
            Entry::Real(v) => Value::from(*v),
            Entry::IntArray(v) => Value::from(v.clone()),
            Entry::RealArray(v) => Value::from(v.clone()),
            Entry::IntMatrix(m) => Value::Array((0..m.rows).map(|r| Value::from(m.row(r).to_vec())).collect()),
            Entry::RealMatrix(m) => Value::Array((0..m.rows).map(|r| Value::from(m.row(r).to_vec())).collect()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    entries: BTreeMap<String, Entry>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, entry: Entry) -> &mut Self {
        self.entries.insert(name.to_owned(), entry);
        self
    }

    pub fn with(mut self, name: &str, entry: Entry) -> Self {
        self.insert(name, entry);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn require(&self, name: &str) -> Result<&Entry, DataError> {
        self.entries
            .get(name)
            .ok_or_else(|| DataError::Missing(name.to_owned()))
    }

    fn wrong(name: &str, expected: &'static str, found: &Entry) -> DataError {
        DataError::Type {
            name: name.to_owned(),
            expected,
            found: found.type_name(),
        }
    }

    pub fn int(&self, name: &str) -> Result<i64, DataError> {
        match self.require(name)? {
            Entry::Int(v) => Ok(*v),
            other => Err(Self::wrong(name, "int", other)),
        }
    }

    /// A nonnegative integer entry as a size.
    pub fn size(&self, name: &str) -> Result<usize, DataError> {
        let v = self.int(name)?;
        usize::try_from(v).map_err(|_| DataError::Shape {
            name: name.to_owned(),
            detail: format!("{v} is negative"),
        })
    }

    pub fn real(&self, name: &str) -> Result<f64, DataError> {
        match self.require(name)? {
            Entry::Int(v) => Ok(*v as f64),
            Entry::Real(v) => Ok(*v),
            other => Err(Self::wrong(name, "real", other)),
        }
    }

    pub fn int_vec(&self, name: &str) -> Result<&[i64], DataError> {
        match self.require(name)? {
            Entry::IntArray(v) => Ok(v),
            other => Err(Self::wrong(name, "int array", other)),
        }
    }

    /// A flat numeric array, widening integers. A lone scalar is treated as
    /// a length-one array.
    pub fn real_vec(&self, name: &str) -> Result<Cow<'_, [f64]>, DataError> {
        match self.require(name)? {
            Entry::IntArray(v) => Ok(Cow::Owned(v.iter().map(|&x| x as f64).collect())),
            Entry::RealArray(v) => Ok(Cow::Borrowed(v)),
            Entry::Int(v) => Ok(Cow::Owned(vec![*v as f64])),
            Entry::Real(v) => Ok(Cow::Owned(vec![*v])),
            other => Err(Self::wrong(name, "real array", other)),
        }
    }

    pub fn int_matrix(&self, name: &str) -> Result<&Matrix<i64>, DataError> {
        match self.require(name)? {
            Entry::IntMatrix(m) => Ok(m),
            other => Err(Self::wrong(name, "int matrix", other)),
        }
    }

    /// A numeric matrix, widening integers.
    pub fn real_matrix(&self, name: &str) -> Result<Cow<'_, Matrix<f64>>, DataError> {
        match self.require(name)? {
            Entry::RealMatrix(m) => Ok(Cow::Borrowed(m)),
            Entry::IntMatrix(m) => Ok(Cow::Owned(Matrix::new(
                m.rows,
                m.cols,
                m.data.iter().map(|&x| x as f64).collect(),
            ))),
            other => Err(Self::wrong(name, "real matrix", other)),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, DataError> {
        let value: Value = serde_json::from_str(text).map_err(|e| DataError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let object = match value {
            Value::Object(map) => map,
            _ => {
                return Err(DataError::Parse {
                    line: 1,
                    column: 1,
                    message: "top level must be a JSON object".into(),
                })
            }
        };
        let mut data = Dataset::new();
        for (name, v) in object {
            let entry = parse_entry(&name, &v)?;
            data.entries.insert(name, entry);
        }
        Ok(data)
    }

    pub fn to_json_string(&self) -> String {
        let map: serde_json::Map<String, Value> = self.entries.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("dataset serializes")
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    Dataset::from_json_str(&text)
}

enum Num {
    Int(i64),
    Real(f64),
}

fn number(name: &str, v: &Value) -> Result<Num, DataError> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Num::Int(i))
            } else {
                n.as_f64().map(Num::Real).ok_or_else(|| DataError::Shape {
                    name: name.to_owned(),
                    detail: format!("{n} is not representable"),
                })
            }
        }
        other => Err(DataError::Shape {
            name: name.to_owned(),
            detail: format!("expected a number, found {other}"),
        }),
    }
}

fn numbers(name: &str, items: &[Value]) -> Result<Entry, DataError> {
    let parsed: Vec<Num> = items.iter().map(|v| number(name, v)).collect::<Result<_, _>>()?;
    if parsed.iter().all(|n| matches!(n, Num::Int(_))) {
        Ok(Entry::IntArray(
            parsed
                .into_iter()
                .map(|n| match n {
                    Num::Int(i) => i,
                    Num::Real(_) => unreachable!(),
                })
                .collect(),
        ))
    } else {
        Ok(Entry::RealArray(
            parsed
                .into_iter()
                .map(|n| match n {
                    Num::Int(i) => i as f64,
                    Num::Real(r) => r,
                })
                .collect(),
        ))
    }
}

fn parse_entry(name: &str, v: &Value) -> Result<Entry, DataError> {
    match v {
        Value::Number(_) => Ok(match number(name, v)? {
            Num::Int(i) => Entry::Int(i),
            Num::Real(r) => Entry::Real(r),
        }),
        Value::Array(items) if items.iter().all(|x| x.is_array()) && !items.is_empty() => {
            let rows: Vec<&Vec<Value>> = items.iter().filter_map(Value::as_array).collect();
            let cols = rows[0].len();
            if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != cols) {
                return Err(DataError::Shape {
                    name: name.to_owned(),
                    detail: format!("ragged rows: row 1 has {cols} columns, row {} has {}", r + 1, row.len()),
                });
            }
            let flat: Vec<Value> = rows.iter().flat_map(|row| row.iter().cloned()).collect();
            Ok(match numbers(name, &flat)? {
                Entry::IntArray(data) => Entry::IntMatrix(Matrix::new(rows.len(), cols, data)),
                Entry::RealArray(data) => Entry::RealMatrix(Matrix::new(rows.len(), cols, data)),
                _ => unreachable!(),
            })
        }
        Value::Array(items) => numbers(name, items),
        other => Err(DataError::Shape {
            name: name.to_owned(),
            detail: format!("unsupported value {other}"),
        }),
    }
}
