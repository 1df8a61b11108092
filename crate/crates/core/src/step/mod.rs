//! Reading and writing of ISO 10303-21 exchange files.
//!
//! The parser is schema-agnostic: every instance is kept with its keyword and
//! typed argument list, and only reference integrity is checked here. Entity
//! interpretation happens in [`crate::brep::resolve_solid`]. Complex
//! (multi-record) instances are kept under the keyword [`COMPLEX_ENTITY`] with
//! one [`Parameter::Typed`] argument per partial record.

mod lexer;
mod parse;
mod write;

pub use parse::parse_step;
pub use write::{format_real, write_step};

use std::collections::BTreeMap;
use thiserror::Error;

/// Keyword under which complex instances are stored.
pub const COMPLEX_ENTITY: &str = "COMPLEX";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("dangling reference #{target} in instance #{from}")]
    DanglingReference { target: u64, from: u64 },
    #[error("duplicate instance id #{0}")]
    DuplicateId(u64),
    #[error("unsupported geometry for export: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameter {
    Integer(i64),
    Real(f64),
    String(String),
    /// Enumeration token without the dots, e.g. `T` for `.T.`.
    Enum(String),
    Ref(u64),
    List(Vec<Parameter>),
    /// Typed value such as `LENGTH_MEASURE(1.)`, or one record of a complex instance.
    Typed { name: String, args: Vec<Parameter> },
    Binary(String),
    /// `$`
    Unset,
    /// `*`
    Derived,
}

impl Parameter {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Parameter::Real(x) => Some(*x),
            Parameter::Integer(i) => Some(*i as f64),
            Parameter::Typed { args, .. } if args.len() == 1 => args[0].as_f64(),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Parameter::Integer(i) => Some(*i),
            Parameter::Real(x) if x.fract() == 0.0 => Some(*x as i64),
            _ => None,
        }
    }

    pub fn as_ref_id(&self) -> Option<u64> {
        match self {
            Parameter::Ref(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Parameter]> {
        match self {
            Parameter::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Parameter::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Parameter::Enum(e) if e == "T" => Some(true),
            Parameter::Enum(e) if e == "F" => Some(false),
            _ => None,
        }
    }

    /// Visits every reference contained in this parameter.
    pub fn for_each_ref(&self, f: &mut impl FnMut(u64)) {
        match self {
            Parameter::Ref(r) => f(*r),
            Parameter::List(items) | Parameter::Typed { args: items, .. } => {
                items.iter().for_each(|p| p.for_each_ref(f))
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInstance {
    pub id: u64,
    /// Upper-case keyword, or [`COMPLEX_ENTITY`].
    pub entity_type: String,
    pub args: Vec<Parameter>,
}

impl StepInstance {
    pub fn is_complex(&self) -> bool {
        self.entity_type == COMPLEX_ENTITY
    }
}

/// One HEADER-section record.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderRecord {
    pub name: String,
    pub args: Vec<Parameter>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepHeader {
    pub records: Vec<HeaderRecord>,
}

impl StepHeader {
    fn record(&self, name: &str) -> Option<&HeaderRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    fn strings(list: Option<&Parameter>) -> Vec<String> {
        list.and_then(Parameter::as_list)
            .map(|l| l.iter().filter_map(|p| p.as_str().map(str::to_owned)).collect())
            .unwrap_or_default()
    }

    pub fn description(&self) -> Vec<String> {
        Self::strings(self.record("FILE_DESCRIPTION").and_then(|r| r.args.first()))
    }

    pub fn file_name(&self) -> Option<String> {
        self.record("FILE_NAME")
            .and_then(|r| r.args.first())
            .and_then(|p| p.as_str().map(str::to_owned))
    }

    /// Schema identifiers exactly as written in FILE_SCHEMA.
    pub fn schemas(&self) -> Vec<String> {
        Self::strings(self.record("FILE_SCHEMA").and_then(|r| r.args.first()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepModel {
    pub header: StepHeader,
    pub instances: BTreeMap<u64, StepInstance>,
}

impl StepModel {
    pub fn get(&self, id: u64) -> Option<&StepInstance> {
        self.instances.get(&id)
    }

    pub fn of_type<'a>(&'a self, entity_type: &'a str) -> impl Iterator<Item = &'a StepInstance> + 'a {
        self.instances.values().filter(move |i| i.entity_type == entity_type)
    }

    pub fn count_of(&self, entity_type: &str) -> usize {
        self.of_type(entity_type).count()
    }
}
