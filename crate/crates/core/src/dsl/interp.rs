use std::cmp::Ordering;

use super::table::Table;
use super::token::{ArgSlot, ColumnRef, Function, Literal, Program, Token, VarRef};
use super::value::{Cell, ErrorCode, Value};

pub const DEFAULT_STEP_BUDGET: usize = 64;

/// Evaluation state for one program run: the table, the variables bound so
/// far, and the remaining expression budget.
pub struct ExecContext<'t> {
    table: &'t Table,
    all_rows: Value,
    bindings: Vec<Value>,
    step_budget: usize,
}

impl<'t> ExecContext<'t> {
    pub fn new(table: &'t Table) -> ExecContext<'t> {
        ExecContext::with_budget(table, DEFAULT_STEP_BUDGET)
    }

    pub fn with_budget(table: &'t Table, step_budget: usize) -> ExecContext<'t> {
        ExecContext {
            table,
            all_rows: Value::RowList(table.all_rows()),
            bindings: Vec::new(),
            step_budget,
        }
    }

    pub fn binding(&self, var: VarRef) -> Option<&Value> {
        match var {
            VarRef::AllRows => Some(&self.all_rows),
            VarRef::Var(i) => self.bindings.get(i as usize),
        }
    }

    pub fn bindings(&self) -> &[Value] {
        &self.bindings
    }

    /// Evaluates one `( F A1 .. AK )` expression given as its inner tokens
    /// and binds the result to the next variable.
    pub fn eval_expression(&mut self, func: Function, args: &[Token]) -> Value {
        if self.step_budget == 0 {
            return Value::error(ErrorCode::BudgetExceeded, "expression budget exhausted");
        }
        self.step_budget -= 1;
        let v = self.apply(func, args);
        self.bindings.push(v.clone());
        v
    }

    fn apply(&self, func: Function, args: &[Token]) -> Value {
        let sig = func.signature();
        if args.len() != sig.len() {
            return type_error(format!("{func} takes {} arguments, got {}", sig.len(), args.len()));
        }
        let mut resolved = Vec::with_capacity(args.len());
        for (slot, tok) in sig.iter().zip(args) {
            match self.resolve(*slot, tok, &resolved) {
                Ok(a) => resolved.push(a),
                Err(e) => return e,
            }
        }
        self.call(func, &resolved)
    }

    fn resolve(&self, slot: ArgSlot, tok: &Token, prior: &[Arg]) -> Result<Arg, Value> {
        match (slot, tok) {
            (ArgSlot::Rows | ArgSlot::Row, Token::Var(var)) => {
                let v = self
                    .binding(*var)
                    .ok_or_else(|| type_error(format!("unbound variable {tok}")))?;
                match v {
                    Value::Row(r) => Ok(Arg::Rows(vec![*r], true)),
                    Value::RowList(rs) => Ok(Arg::Rows(rs.clone(), false)),
                    Value::Error(_) => Err(v.clone()),
                    _ => Err(type_error(format!("{tok} is not row-valued"))),
                }
            }
            (ArgSlot::Column(cs), Token::Column(c)) => {
                let idx = self.column(c)?;
                let value_kind = prior.iter().find_map(|a| match a {
                    Arg::Value(l) => Some(l.kind()),
                    _ => None,
                });
                if !cs.admits(c.kind, value_kind) {
                    return Err(type_error(format!("column {tok} does not fit {cs:?}")));
                }
                Ok(Arg::Column(idx))
            }
            (ArgSlot::CmpValue, Token::Literal(l)) if !matches!(l, Literal::String(_)) => Ok(Arg::Value(l.clone())),
            (ArgSlot::StrValue, Token::Literal(l @ Literal::String(_))) => Ok(Arg::Value(l.clone())),
            _ => Err(type_error(format!("{tok} does not fit {slot:?}"))),
        }
    }

    fn column(&self, c: &ColumnRef) -> Result<usize, Value> {
        let idx = self
            .table
            .column_index(&c.id)
            .ok_or_else(|| type_error(format!("no column `{}`", c.id)))?;
        if self.table.columns()[idx].kind != c.kind {
            return Err(type_error(format!("column `{}` is not {:?}", c.id, c.kind)));
        }
        Ok(idx)
    }

    fn call(&self, func: Function, args: &[Arg]) -> Value {
        let t = self.table;
        match func {
            Function::Hop => {
                let (rows, single) = args[0].rows();
                let col = args[1].col();
                if single {
                    match t.cell(rows[0], col) {
                        Some(c) => c.clone().into_value(),
                        None => Value::error(ErrorCode::EmptyInput, "hop of an empty cell"),
                    }
                } else {
                    Value::CellList(rows.iter().filter_map(|&r| t.cell(r, col).cloned()).collect())
                }
            }
            Function::Argmax | Function::Argmin => {
                let rows = args[0].rows().0;
                let col = args[1].col();
                let want = if func == Function::Argmax {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
                let mut best: Option<&Cell> = None;
                for &r in rows {
                    if let Some(c) = t.cell(r, col) {
                        if best.is_none_or(|b| c.order(b) == Some(want)) {
                            best = Some(c);
                        }
                    }
                }
                let Some(best) = best else {
                    return Value::error(ErrorCode::EmptyInput, format!("{func} over no values"));
                };
                Value::RowList(
                    rows.iter()
                        .copied()
                        .filter(|&r| t.cell(r, col).and_then(|c| c.order(best)) == Some(Ordering::Equal))
                        .collect(),
                )
            }
            Function::FilterGt
            | Function::FilterGe
            | Function::FilterLt
            | Function::FilterLe
            | Function::FilterEq
            | Function::FilterNe => {
                let rows = args[0].rows().0;
                let probe = literal_cell(args[1].value());
                let col = args[2].col();
                let keep = |o: Ordering| match func {
                    Function::FilterGt => o == Ordering::Greater,
                    Function::FilterGe => o != Ordering::Less,
                    Function::FilterLt => o == Ordering::Less,
                    Function::FilterLe => o != Ordering::Greater,
                    Function::FilterEq => o == Ordering::Equal,
                    _ => o != Ordering::Equal,
                };
                Value::RowList(
                    rows.iter()
                        .copied()
                        .filter(|&r| t.cell(r, col).and_then(|c| c.order(&probe)).is_some_and(keep))
                        .collect(),
                )
            }
            Function::FilterIn | Function::FilterNotIn => {
                let rows = args[0].rows().0;
                let Literal::String(q) = args[1].value() else {
                    return type_error("filter_in needs a string");
                };
                let q = q.to_lowercase();
                let col = args[2].col();
                let contains = |r: usize| match t.cell(r, col) {
                    Some(Cell::String(s)) => s.to_lowercase().contains(&q),
                    _ => false,
                };
                let want = func == Function::FilterIn;
                Value::RowList(rows.iter().copied().filter(|&r| contains(r) == want).collect())
            }
            Function::First | Function::Last => {
                let rows = args[0].rows().0;
                let pick = if func == Function::First {
                    rows.first()
                } else {
                    rows.last()
                };
                match pick {
                    Some(&r) => Value::Row(r),
                    None => Value::error(ErrorCode::EmptyInput, format!("{func} of no rows")),
                }
            }
            Function::Previous | Function::Next => match single_row(&args[0]) {
                Ok(r) => {
                    let target = if func == Function::Previous {
                        r.checked_sub(1)
                    } else {
                        Some(r + 1).filter(|&n| n < t.n_rows())
                    };
                    match target {
                        Some(n) => Value::Row(n),
                        None => Value::error(ErrorCode::OutOfTable, format!("{func} of row {r}")),
                    }
                }
                Err(e) => e,
            },
            Function::Count => Value::Number(args[0].rows().0.len() as f64),
            Function::Max | Function::Min | Function::Average | Function::Sum => {
                let rows = args[0].rows().0;
                let col = args[1].col();
                let xs: Vec<f64> = rows.iter().filter_map(|&r| t.cell(r, col).and_then(Cell::as_number)).collect();
                if xs.is_empty() && func != Function::Sum {
                    return Value::error(ErrorCode::EmptyInput, format!("{func} over no values"));
                }
                let x = match func {
                    Function::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Function::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
                    Function::Sum => xs.iter().sum(),
                    _ => xs.iter().sum::<f64>() / xs.len() as f64,
                };
                Value::Number(x)
            }
            Function::Mode => {
                let rows = args[0].rows().0;
                let col = args[1].col();
                let mut counts: Vec<(&Cell, usize)> = Vec::new();
                for &r in rows {
                    if let Some(c) = t.cell(r, col) {
                        match counts.iter_mut().find(|(seen, _)| seen.same(c)) {
                            Some(entry) => entry.1 += 1,
                            None => counts.push((c, 1)),
                        }
                    }
                }
                // first maximum in first-occurrence order
                let mut best: Option<(&Cell, usize)> = None;
                for (c, n) in counts {
                    if best.is_none_or(|(_, b)| n > b) {
                        best = Some((c, n));
                    }
                }
                match best {
                    Some((c, _)) => c.clone().into_value(),
                    None => Value::error(ErrorCode::EmptyInput, "mode over no values"),
                }
            }
            Function::SameAs => match single_row(&args[0]) {
                Ok(r) => {
                    let col = args[1].col();
                    let Some(probe) = t.cell(r, col) else {
                        return Value::RowList(Vec::new());
                    };
                    Value::RowList(
                        (0..t.n_rows())
                            .filter(|&o| o != r && t.cell(o, col).is_some_and(|c| c.same(probe)))
                            .collect(),
                    )
                }
                Err(e) => e,
            },
            Function::Diff => {
                let a = match single_row(&args[0]) {
                    Ok(r) => r,
                    Err(e) => return e,
                };
                let b = match single_row(&args[1]) {
                    Ok(r) => r,
                    Err(e) => return e,
                };
                let col = args[2].col();
                match (t.cell(a, col).and_then(Cell::as_number), t.cell(b, col).and_then(Cell::as_number)) {
                    (Some(x), Some(y)) => Value::Number(x - y),
                    _ => Value::error(ErrorCode::EmptyInput, "diff over an empty cell"),
                }
            }
        }
    }
}

enum Arg {
    /// Row indices, and whether the source value was a single row.
    Rows(Vec<usize>, bool),
    Column(usize),
    Value(Literal),
}

impl Arg {
    fn rows(&self) -> (&[usize], bool) {
        match self {
            Arg::Rows(r, single) => (r, *single),
            _ => unreachable!("slot typing guarantees rows"),
        }
    }

    fn col(&self) -> usize {
        match self {
            Arg::Column(c) => *c,
            _ => unreachable!("slot typing guarantees a column"),
        }
    }

    fn value(&self) -> &Literal {
        match self {
            Arg::Value(l) => l,
            _ => unreachable!("slot typing guarantees a literal"),
        }
    }
}

fn single_row(arg: &Arg) -> Result<usize, Value> {
    match arg.rows().0 {
        [r] => Ok(*r),
        [] => Err(Value::error(ErrorCode::EmptyInput, "expected a row, got no rows")),
        rs => Err(Value::error(ErrorCode::NotSingleRow, format!("expected a row, got {} rows", rs.len()))),
    }
}

fn literal_cell(l: &Literal) -> Cell {
    match l {
        Literal::Number(x) => Cell::Number(*x),
        Literal::Date(d) => Cell::Date(*d),
        Literal::String(s) => Cell::String(s.to_string()),
    }
}

fn type_error(msg: impl Into<String>) -> Value {
    Value::error(ErrorCode::TypeError, msg)
}

/// Runs a complete program left to right, binding expression `i` to `v{i}`,
/// and returns the value of the last expression. Never panics on bad input:
/// every failure is a `Value::Error`.
pub fn execute(program: &Program, table: &Table) -> Value {
    execute_with_budget(program, table, DEFAULT_STEP_BUDGET)
}

pub fn execute_with_budget(program: &Program, table: &Table, step_budget: usize) -> Value {
    if !program.is_complete() {
        return Value::error(ErrorCode::Incomplete, "program does not end with EOS");
    }
    let mut ctx = ExecContext::with_budget(table, step_budget);
    let toks = program.tokens();
    let mut i = 0;
    let mut last: Option<Value> = None;
    while i < toks.len() {
        match &toks[i] {
            Token::Eos if i + 1 == toks.len() => break,
            Token::Open => {
                let Some(Token::Func(func)) = toks.get(i + 1) else {
                    return type_error("expression must start with a function");
                };
                let Some(close) = toks[i + 2..].iter().position(|t| *t == Token::Close) else {
                    return type_error("unterminated expression");
                };
                let args = &toks[i + 2..i + 2 + close];
                let v = ctx.eval_expression(*func, args);
                if matches!(v.error_code(), Some(ErrorCode::BudgetExceeded | ErrorCode::TypeError)) {
                    return v;
                }
                last = Some(v);
                i += close + 3;
            }
            t => return type_error(format!("unexpected token {t} between expressions")),
        }
    }
    match last {
        Some(v) => v,
        None => type_error("program has no expressions"),
    }
}
