//! A small, closed expression language for row filters and derived columns.
//!
//! ```text
//! expr       := or
//! or         := and ( "or" and )*
//! and        := not ( "and" not )*
//! not        := "not" not | comparison
//! comparison := additive ( ( ">" | ">=" | "<" | "<=" | "==" | "!=" ) additive )?
//! additive   := multiplicative ( ( "+" | "-" ) multiplicative )*
//! multiplicative := unary ( ( "*" | "/" ) unary )*
//! unary      := "-" unary | postfix
//! postfix    := primary ( "." ( "notna" | "isna" ) "(" ")" )*
//! primary    := NUMBER | STRING | "True" | "False" | IDENT | `QUOTED IDENT` | "(" expr ")"
//! ```
//!
//! Evaluation is vectorised over a [`Table`]. A comparison with a missing
//! operand is `false`; arithmetic with a missing operand is missing, as is
//! division by zero; logical operators read missing as `false`.

use std::fmt;

use crate::error::{Result, TabularError};
use crate::table::{ColumnData, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Gt | BinOp::Ge | BinOp::Lt | BinOp::Le | BinOp::Eq | BinOp::Ne)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Column(String),
    Num(f64),
    Str(String),
    Bool(bool),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    NotNa(Box<Expr>),
    IsNa(Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn col(name: &str) -> Expr {
        Expr::Column(name.to_string())
    }

    /// Column names referenced anywhere in the expression.
    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk_columns(&mut out);
        out
    }

    fn walk_columns(&self, out: &mut Vec<String>) {
        match self {
            Expr::Column(c) => {
                if !out.contains(c) {
                    out.push(c.clone())
                }
            }
            Expr::Neg(e) | Expr::Not(e) | Expr::NotNa(e) | Expr::IsNa(e) => e.walk_columns(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk_columns(out);
                rhs.walk_columns(out);
            }
            _ => {}
        }
    }
}

const KEYWORDS: &[&str] = &["and", "or", "not", "True", "False", "true", "false"];

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

/// Fully parenthesised rendering; parsing it yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) if is_plain_ident(c) => write!(f, "{c}"),
            Expr::Column(c) => write!(f, "`{c}`"),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Str(s) => {
                f.write_str("'")?;
                for ch in s.chars() {
                    match ch {
                        '\'' => f.write_str("\\'")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("'")
            }
            Expr::Bool(true) => f.write_str("True"),
            Expr::Bool(false) => f.write_str("False"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Not(e) => write!(f, "(not {e})"),
            Expr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::NotNa(e) | Expr::IsNa(e) => {
                let method = if matches!(self, Expr::NotNa(_)) { "notna" } else { "isna" };
                match **e {
                    Expr::Num(_) => write!(f, "({e}).{method}()"),
                    _ => write!(f, "{e}.{method}()"),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprParseError {
    /// Byte offset into the source.
    pub position: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for ExprParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid syntax at byte {}: found {}", self.position, self.found)?;
        if !self.expected.is_empty() {
            write!(f, ", expected one of: {}", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ExprParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Op(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(v) => format!("number {v}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Op(o) => format!("'{o}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

fn lex(src: &str) -> std::result::Result<Vec<(usize, Tok)>, ExprParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, found: String, expected: Vec<&'static str>| ExprParseError { position: pos, found, expected };
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| err(start, format!("'{text}'"), vec!["number"]))?;
            out.push((start, Tok::Num(v)));
        } else if c == '\'' || c == '"' {
            let quote = bytes[i];
            i += 1;
            let mut s = String::new();
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(err(start, "unterminated string".into(), vec!["closing quote"]));
                };
                i += ch.len_utf8();
                if ch as u32 == quote as u32 {
                    break;
                }
                if ch == '\\' {
                    let Some(esc) = src[i..].chars().next() else {
                        return Err(err(start, "unterminated string".into(), vec!["closing quote"]));
                    };
                    i += esc.len_utf8();
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                } else {
                    s.push(ch);
                }
            }
            out.push((start, Tok::Str(s)));
        } else if c == '`' {
            let Some(end) = src[i + 1..].find('`') else {
                return Err(err(start, "unterminated quoted name".into(), vec!["closing backtick"]));
            };
            out.push((start, Tok::Ident(format!("`{}", &src[i + 1..i + 1 + end]))));
            i += end + 2;
        } else {
            let two = src.get(i..i + 2).unwrap_or("");
            let op: &'static str = match two {
                ">=" => ">=",
                "<=" => "<=",
                "==" => "==",
                "!=" => "!=",
                _ => match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '>' => ">",
                    '<' => "<",
                    '(' => "(",
                    ')' => ")",
                    '.' => ".",
                    _ => {
                        let ch = src[i..].chars().next().unwrap();
                        return Err(err(start, format!("'{ch}'"), vec!["operator", "operand"]));
                    }
                },
            };
            i += op.len();
            out.push((start, Tok::Op(op)));
        }
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

type PResult<T> = std::result::Result<T, ExprParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: Vec<&'static str>) -> PResult<T> {
        Err(ExprParseError { position: self.offset(), found: self.peek().describe(), expected })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn expect_op(&mut self, op: &'static str) -> PResult<()> {
        if self.is_op(op) {
            self.bump();
            Ok(())
        } else {
            self.fail(vec![op])
        }
    }

    fn parse_or(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_and()?;
        while self.is_kw("or") {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_not()?;
        while self.is_kw("and") {
            self.bump();
            let rhs = self.parse_not()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.parse_not()?)));
        }
        self.parse_comparison()
    }

    fn parse_comparison(&mut self) -> PResult<Expr> {
        let lhs = self.parse_additive()?;
        let op = match self.peek() {
            Tok::Op(">") => BinOp::Gt,
            Tok::Op(">=") => BinOp::Ge,
            Tok::Op("<") => BinOp::Lt,
            Tok::Op("<=") => BinOp::Le,
            Tok::Op("==") => BinOp::Eq,
            Tok::Op("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.parse_additive()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn parse_additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        if self.is_op("-") {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let mut e = self.parse_primary()?;
        while self.is_op(".") {
            self.bump();
            let wrap: fn(Box<Expr>) -> Expr = match self.peek() {
                Tok::Ident(s) if s == "notna" => Expr::NotNa,
                Tok::Ident(s) if s == "isna" => Expr::IsNa,
                _ => return self.fail(vec!["notna", "isna"]),
            };
            self.bump();
            self.expect_op("(")?;
            self.expect_op(")")?;
            e = wrap(Box::new(e));
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        const OPERAND: &[&str] = &["number", "string", "column name", "True", "False", "("];
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Ident(s) => match s.as_str() {
                "True" | "true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "False" | "false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "and" | "or" | "not" => self.fail(OPERAND.to_vec()),
                _ => {
                    self.bump();
                    Ok(Expr::Column(s.strip_prefix('`').unwrap_or(&s).to_string()))
                }
            },
            Tok::Op("(") => {
                self.bump();
                let e = self.parse_or()?;
                self.expect_op(")")?;
                Ok(e)
            }
            _ => self.fail(OPERAND.to_vec()),
        }
    }
}

/// Parse a complete expression; trailing input is an error.
pub fn parse(src: &str) -> std::result::Result<Expr, ExprParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.parse_or()?;
    if *p.peek() != Tok::Eof {
        return p.fail(vec!["and", "or", "operator", "end of input"]);
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExprType {
    Num,
    Bool,
    Str,
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExprType::Num => "numeric",
            ExprType::Bool => "boolean",
            ExprType::Str => "string",
        })
    }
}

/// A vectorised evaluation result.
#[derive(Clone, Debug, PartialEq)]
pub enum Series {
    Num(Vec<Option<f64>>),
    Bool(Vec<Option<bool>>),
    Str(Vec<Option<String>>),
}

impl Series {
    pub fn ty(&self) -> ExprType {
        match self {
            Series::Num(_) => ExprType::Num,
            Series::Bool(_) => ExprType::Bool,
            Series::Str(_) => ExprType::Str,
        }
    }

    fn missing_mask(&self) -> Vec<bool> {
        match self {
            Series::Num(v) => v.iter().map(Option::is_none).collect(),
            Series::Bool(v) => v.iter().map(Option::is_none).collect(),
            Series::Str(v) => v.iter().map(Option::is_none).collect(),
        }
    }

    /// Convert to a table column.
    pub fn into_column_data(self) -> ColumnData {
        match self {
            Series::Num(v) => ColumnData::Float(v),
            Series::Bool(v) => ColumnData::Bool(v),
            Series::Str(v) => ColumnData::Text(v),
        }
    }
}

fn type_error(node: &Expr, detail: impl fmt::Display) -> TabularError {
    TabularError::ExprType(format!("unsupported operand type(s) in `{node}`: {detail}"))
}

/// Evaluate `expr` over every row of `df`.
pub fn eval(expr: &Expr, df: &Table) -> Result<Series> {
    let n = df.n_rows();
    Ok(match expr {
        Expr::Column(name) => {
            let col = df.column(name)?;
            match &col.data {
                ColumnData::Int(_) | ColumnData::Float(_) => Series::Num(col.data.to_f64().unwrap()),
                ColumnData::Bool(v) => Series::Bool(v.clone()),
                ColumnData::Category(v) | ColumnData::Text(v) | ColumnData::Datetime(v) => Series::Str(v.clone()),
            }
        }
        Expr::Num(v) => Series::Num(vec![Some(*v); n]),
        Expr::Str(s) => Series::Str(vec![Some(s.clone()); n]),
        Expr::Bool(b) => Series::Bool(vec![Some(*b); n]),
        Expr::Neg(inner) => match eval(inner, df)? {
            Series::Num(v) => Series::Num(v.into_iter().map(|x| x.map(|x| -x)).collect()),
            other => return Err(type_error(expr, format!("bad operand type for unary -: {}", other.ty()))),
        },
        Expr::Not(inner) => match eval(inner, df)? {
            Series::Bool(v) => Series::Bool(v.into_iter().map(|x| Some(!x.unwrap_or(false))).collect()),
            other => return Err(type_error(expr, format!("bad operand type for not: {}", other.ty()))),
        },
        Expr::NotNa(inner) => Series::Bool(eval(inner, df)?.missing_mask().into_iter().map(|m| Some(!m)).collect()),
        Expr::IsNa(inner) => Series::Bool(eval(inner, df)?.missing_mask().into_iter().map(Some).collect()),
        Expr::Binary { op, lhs, rhs } => {
            let l = eval(lhs, df)?;
            let r = eval(rhs, df)?;
            eval_binary(expr, *op, l, r)?
        }
    })
}

fn eval_binary(node: &Expr, op: BinOp, l: Series, r: Series) -> Result<Series> {
    use std::cmp::Ordering;
    fn cmp_result(op: BinOp, ord: Ordering) -> bool {
        match op {
            BinOp::Gt => ord == Ordering::Greater,
            BinOp::Ge => ord != Ordering::Less,
            BinOp::Lt => ord == Ordering::Less,
            BinOp::Le => ord != Ordering::Greater,
            BinOp::Eq => ord == Ordering::Equal,
            BinOp::Ne => ord != Ordering::Equal,
            _ => unreachable!(),
        }
    }
    fn compare<T, F>(op: BinOp, a: &[Option<T>], b: &[Option<T>], ord: F) -> Series
    where
        F: Fn(&T, &T) -> Ordering,
    {
        Series::Bool(
            a.iter()
                .zip(b)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => Some(cmp_result(op, ord(x, y))),
                    _ => Some(false),
                })
                .collect(),
        )
    }

    if op.is_arithmetic() {
        let (Series::Num(a), Series::Num(b)) = (&l, &r) else {
            return Err(type_error(node, format!("'{}' and '{}'", l.ty(), r.ty())));
        };
        let out = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let (x, y) = ((*x)?, (*y)?);
                let v = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return None;
                        }
                        x / y
                    }
                    _ => unreachable!(),
                };
                v.is_finite().then_some(v)
            })
            .collect();
        return Ok(Series::Num(out));
    }
    if op.is_comparison() {
        return Ok(match (&l, &r) {
            (Series::Num(a), Series::Num(b)) => compare(op, a, b, |x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal)),
            (Series::Str(a), Series::Str(b)) => compare(op, a, b, |x, y| x.cmp(y)),
            (Series::Bool(a), Series::Bool(b)) => compare(op, a, b, |x, y| x.cmp(y)),
            _ => return Err(type_error(node, format!("cannot compare {} with {}", l.ty(), r.ty()))),
        });
    }
    let (Series::Bool(a), Series::Bool(b)) = (&l, &r) else {
        return Err(type_error(node, format!("'{}' requires boolean operands, got {} and {}", op.symbol(), l.ty(), r.ty())));
    };
    Ok(Series::Bool(
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let (x, y) = (x.unwrap_or(false), y.unwrap_or(false));
                Some(if op == BinOp::And { x && y } else { x || y })
            })
            .collect(),
    ))
}

/// Row mask for a boolean condition; missing evaluates to `false`.
pub fn eval_mask(expr: &Expr, df: &Table) -> Result<Vec<bool>> {
    match eval(expr, df)? {
        Series::Bool(v) => Ok(v.into_iter().map(|x| x.unwrap_or(false)).collect()),
        other => Err(TabularError::NonBooleanCondition(format!("{} for `{expr}`", other.ty()))),
    }
}

pub fn eval_numeric(expr: &Expr, df: &Table) -> Result<Vec<Option<f64>>> {
    match eval(expr, df)? {
        Series::Num(v) => Ok(v),
        other => Err(type_error(expr, format!("expected a numeric result, got {}", other.ty()))),
    }
}

/// Static type of `expr` against the dtypes of `df`.
pub fn type_of(expr: &Expr, df: &Table) -> Result<ExprType> {
    eval(expr, &df.take_rows(&[])).map(|s| s.ty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Column;

    fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    #[test]
    fn parses_conjunction_of_comparisons() {
        let e = parse("a > 0 and b < 100").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::And,
                Expr::binary(BinOp::Gt, Expr::col("a"), num(0.0)),
                Expr::binary(BinOp::Lt, Expr::col("b"), num(100.0)),
            )
        );
    }

    #[test]
    fn postfix_on_a_number_round_trips() {
        let e = Expr::IsNa(Box::new(num(7.75)));
        assert_eq!(e.to_string(), "(7.75).isna()");
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn parses_notna_postfix() {
        assert_eq!(parse("Transported.notna()").unwrap(), Expr::NotNa(Box::new(Expr::col("Transported"))));
    }

    #[test]
    fn reports_offset_of_unexpected_operator() {
        let err = parse("a + * b").unwrap_err();
        assert_eq!(err.position, 4);
        assert_eq!(err.found, "'*'");
    }

    #[test]
    fn rejects_trailing_input_and_chained_comparison() {
        assert!(parse("a b").is_err());
        assert!(parse("a < b < c").is_err());
        assert!(parse("").is_err());
        assert!(parse("(a").is_err());
    }

    #[test]
    fn precedence_layers() {
        let e = parse("not a > 1 + 2 * 3 or b").unwrap();
        assert_eq!(e.to_string(), "((not (a > (1.0 + (2.0 * 3.0)))) or b)");
        assert_eq!(parse("-x.isna()").unwrap(), Expr::Neg(Box::new(Expr::IsNa(Box::new(Expr::col("x"))))));
    }

    #[test]
    fn string_literals_and_quoted_names() {
        let e = parse("`home planet` == \"Earth\" or c != 'it\\'s'").unwrap();
        assert_eq!(e.columns(), vec!["home planet".to_string(), "c".to_string()]);
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    fn table() -> Table {
        Table::new(vec![
            Column::new("a", ColumnData::Int(vec![Some(1), Some(-1), None])),
            Column::new("b", ColumnData::Float(vec![Some(2.0), Some(0.0), Some(1.0)])),
            Column::new("s", ColumnData::Text(vec![Some("x".into()), None, Some("y".into())])),
        ])
        .unwrap()
    }

    #[test]
    fn comparison_with_missing_is_false() {
        let e = parse("a > 0").unwrap();
        assert_eq!(eval_mask(&e, &table()).unwrap(), vec![true, false, false]);
        let ne = parse("a != 5").unwrap();
        assert_eq!(eval_mask(&ne, &table()).unwrap(), vec![true, true, false]);
    }

    #[test]
    fn arithmetic_propagates_missing_and_div_zero() {
        let e = parse("a + b").unwrap();
        assert_eq!(eval_numeric(&e, &table()).unwrap(), vec![Some(3.0), Some(-1.0), None]);
        let d = parse("a / b").unwrap();
        assert_eq!(eval_numeric(&d, &table()).unwrap(), vec![Some(0.5), None, None]);
    }

    #[test]
    fn logical_on_numeric_is_type_error() {
        let e = parse("a and 3").unwrap();
        assert!(matches!(eval(&e, &table()), Err(TabularError::ExprType(_))));
        let e = parse("s + 1").unwrap();
        assert!(matches!(eval(&e, &table()), Err(TabularError::ExprType(_))));
    }

    #[test]
    fn notna_and_unknown_column() {
        let e = parse("s.notna()").unwrap();
        assert_eq!(eval_mask(&e, &table()).unwrap(), vec![true, false, true]);
        assert!(matches!(eval(&parse("zzz > 1").unwrap(), &table()), Err(TabularError::UnknownColumn(_))));
    }

    #[test]
    fn non_boolean_mask_is_rejected() {
        assert!(matches!(
            eval_mask(&parse("a + 1").unwrap(), &table()),
            Err(TabularError::NonBooleanCondition(_))
        ));
    }
}
