//! Syntax tree of the modelling language.

use std::fmt;

use super::lexer::Span;
use crate::model::ModelKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "|",
            BinaryOp::And => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Neq => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Neq
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Function {
    Min,
    Max,
    Floor,
    Ceil,
    Pow,
    Mod,
}

impl Function {
    pub fn from_name(name: &str) -> Option<Function> {
        Some(match name {
            "min" => Function::Min,
            "max" => Function::Max,
            "floor" => Function::Floor,
            "ceil" => Function::Ceil,
            "pow" => Function::Pow,
            "mod" => Function::Mod,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Min => "min",
            Function::Max => "max",
            Function::Floor => "floor",
            Function::Ceil => "ceil",
            Function::Pow => "pow",
            Function::Mod => "mod",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Bool(bool),
    Int(i64),
    /// Real literal as written.
    Real(String),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Structural equality ignoring source positions.
    pub fn same_shape(&self, other: &Expr) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Unary(a, x), ExprKind::Unary(b, y)) => a == b && x.same_shape(y),
            (ExprKind::Binary(a, x1, x2), ExprKind::Binary(b, y1, y2)) => {
                a == b && x1.same_shape(y1) && x2.same_shape(y2)
            }
            (ExprKind::Call(f, xs), ExprKind::Call(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.same_shape(y))
            }
            (a, b) => a == b,
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, ..) => op.precedence(),
            ExprKind::Unary(UnaryOp::Not, _) => 3,
            ExprKind::Unary(UnaryOp::Neg, _) => 7,
            _ => 8,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let parens = self.precedence() < min;
        if parens {
            f.write_str("(")?;
        }
        match &self.kind {
            ExprKind::Bool(b) => write!(f, "{}", b)?,
            ExprKind::Int(v) => write!(f, "{}", v)?,
            ExprKind::Real(text) => f.write_str(text)?,
            ExprKind::Ident(name) => f.write_str(name)?,
            ExprKind::Unary(UnaryOp::Not, e) => {
                f.write_str("!")?;
                e.fmt_at(f, 3)?;
            }
            ExprKind::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                e.fmt_at(f, 7)?;
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                // Relational operators do not chain; everything else is left-associative.
                l.fmt_at(f, if op.is_relational() { p + 1 } else { p })?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_at(f, p + 1)?;
            }
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_at(f, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstType {
    Int,
    Double,
    Bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    pub value: Option<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VarType {
    Bool,
    Range(Expr, Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    /// Defaults to the lower bound (or `false`) when omitted.
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub var: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Update {
    /// Probability (DTMC, MDP) or rate (CTMC); 1 when omitted.
    pub weight: Option<Expr>,
    pub assignments: Vec<Assignment>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub name: String,
    pub variables: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RewardItem {
    State {
        guard: Expr,
        value: Expr,
    },
    /// `action` is `None` for `[]`, which matches unlabelled commands.
    Action {
        action: Option<String>,
        guard: Expr,
        value: Expr,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardBlock {
    pub name: String,
    pub items: Vec<RewardItem>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub model_type: ModelKind,
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub modules: Vec<Module>,
    pub labels: Vec<LabelDecl>,
    pub rewards: Vec<RewardBlock>,
}
