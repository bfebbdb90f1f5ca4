//! The Lisp-like table query language: values, tables, tokens, the
//! interpreter, and the next-token validity oracle.

pub mod answer;
pub mod grammar;
pub mod interp;
pub mod table;
pub mod token;
pub mod value;

pub use answer::{answer_match, canonical, denotation_strings};
pub use grammar::{valid_next_tokens, DecodeState, Grammar, Scope, VarType};
pub use interp::{execute, execute_with_budget, ExecContext};
pub use table::{Column, Table, TableError};
pub use token::{ArgSlot, ColumnRef, ColumnSlot, Function, Literal, ParseError, Program, Token, VarRef};
pub use value::{Cell, Date, ErrorCode, ExecError, Kind, Value};
