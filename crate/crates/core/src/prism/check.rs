//! Name resolution, type checking and evaluation of expressions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use super::ast::*;
use super::lexer::Span;
use super::parser::parse_expression;
use super::PrismError;
use crate::model::ModelKind;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Int,
    Double,
}

impl Type {
    fn is_numeric(self) -> bool {
        self != Type::Bool
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Double => "double",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value<T> {
    Bool(bool),
    Int(i64),
    Real(T),
}

impl<T: Scalar> Value<T> {
    pub fn ty(&self) -> Type {
        match self {
            Value::Bool(_) => Type::Bool,
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Double,
        }
    }

    /// Boolean content; only called on expressions typed `bool`.
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            _ => unreachable!("type checker admitted a non-boolean"),
        }
    }

    /// Numeric content promoted to the scalar domain.
    pub fn as_real(&self) -> T {
        match self {
            Value::Int(i) => T::from_i64(*i),
            Value::Real(r) => r.clone(),
            Value::Bool(_) => unreachable!("type checker admitted a boolean as a number"),
        }
    }

    fn as_int(&self) -> i64 {
        match self {
            Value::Int(i) => *i,
            _ => unreachable!("type checker admitted a non-integer"),
        }
    }
}

impl<T: Scalar> fmt::Display for Value<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{}", b),
            Value::Int(i) => write!(f, "{}", i),
            Value::Real(r) => f.write_str(&r.to_canonical()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node<T> {
    Value(Value<T>),
    /// Slot in the state vector.
    Var(usize),
    Unary(UnaryOp, Box<TypedExpr<T>>),
    Binary(BinaryOp, Box<TypedExpr<T>>, Box<TypedExpr<T>>),
    Call(Function, Vec<TypedExpr<T>>),
}

/// Expression with its type, constants and formulas substituted, and closed
/// subterms folded.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedExpr<T> {
    ty: Type,
    node: Node<T>,
    span: Span,
}

impl<T: Scalar> TypedExpr<T> {
    pub fn ty(&self) -> Type {
        self.ty
    }

    pub fn span(&self) -> Span {
        self.span
    }

    /// The folded value, if the expression does not depend on the state.
    pub fn constant(&self) -> Option<&Value<T>> {
        match &self.node {
            Node::Value(v) => Some(v),
            _ => None,
        }
    }

    fn value(value: Value<T>, span: Span) -> Self {
        TypedExpr {
            ty: value.ty(),
            node: Node::Value(value),
            span,
        }
    }

    /// Evaluates under a state vector (booleans stored as 0/1).
    pub fn eval(&self, state: &[i64]) -> Result<Value<T>, PrismError> {
        match &self.node {
            Node::Value(v) => Ok(v.clone()),
            Node::Var(slot) => Ok(match self.ty {
                Type::Bool => Value::Bool(state[*slot] != 0),
                _ => Value::Int(state[*slot]),
            }),
            Node::Unary(op, e) => {
                let v = e.eval(state)?;
                Ok(match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnaryOp::Neg, Value::Int(i)) => Value::Int(i.checked_neg().ok_or(self.overflow())?),
                    (UnaryOp::Neg, Value::Real(r)) => Value::Real(-r),
                    _ => unreachable!("ill-typed unary operand"),
                })
            }
            Node::Binary(op, l, r) => self.eval_binary(*op, l, r, state),
            Node::Call(func, args) => {
                let values = args.iter().map(|a| a.eval(state)).collect::<Result<Vec<_>, _>>()?;
                self.eval_call(*func, values)
            }
        }
    }

    pub fn eval_bool(&self, state: &[i64]) -> Result<bool, PrismError> {
        Ok(self.eval(state)?.as_bool())
    }

    fn overflow(&self) -> PrismError {
        PrismError::Overflow { span: self.span }
    }

    fn eval_binary(
        &self,
        op: BinaryOp,
        l: &TypedExpr<T>,
        r: &TypedExpr<T>,
        state: &[i64],
    ) -> Result<Value<T>, PrismError> {
        // Short-circuit the boolean connectives.
        match op {
            BinaryOp::And => return Ok(Value::Bool(l.eval_bool(state)? && r.eval_bool(state)?)),
            BinaryOp::Or => return Ok(Value::Bool(l.eval_bool(state)? || r.eval_bool(state)?)),
            _ => {}
        }
        let a = l.eval(state)?;
        let b = r.eval(state)?;
        if let (Value::Bool(x), Value::Bool(y)) = (&a, &b) {
            return Ok(Value::Bool(match op {
                BinaryOp::Eq => x == y,
                BinaryOp::Neq => x != y,
                _ => unreachable!("ill-typed boolean operands"),
            }));
        }
        if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
            let (x, y) = (*x, *y);
            let int = |v: Option<i64>| v.map(Value::Int).ok_or(self.overflow());
            return match op {
                BinaryOp::Add => int(x.checked_add(y)),
                BinaryOp::Sub => int(x.checked_sub(y)),
                BinaryOp::Mul => int(x.checked_mul(y)),
                BinaryOp::Div => {
                    if y == 0 {
                        Err(PrismError::DivisionByZero { span: self.span })
                    } else {
                        Ok(Value::Real(T::from_i64(x) / T::from_i64(y)))
                    }
                }
                _ => Ok(Value::Bool(compare(op, &x, &y))),
            };
        }
        let (x, y) = (a.as_real(), b.as_real());
        Ok(match op {
            BinaryOp::Add => Value::Real(x + y),
            BinaryOp::Sub => Value::Real(x - y),
            BinaryOp::Mul => Value::Real(x * y),
            BinaryOp::Div => {
                if y.is_zero() {
                    return Err(PrismError::DivisionByZero { span: self.span });
                }
                Value::Real(x / y)
            }
            _ => Value::Bool(compare(op, &x, &y)),
        })
    }

    fn eval_call(&self, func: Function, args: Vec<Value<T>>) -> Result<Value<T>, PrismError> {
        match func {
            Function::Min | Function::Max => {
                let pick_second = |a: &Value<T>, b: &Value<T>| {
                    let (x, y) = (a.as_real(), b.as_real());
                    if func == Function::Min {
                        y < x
                    } else {
                        y > x
                    }
                };
                let mut best = args[0].clone();
                for a in &args[1..] {
                    if pick_second(&best, a) {
                        best = a.clone();
                    }
                }
                // Promote when the arguments mix int and double.
                Ok(if self.ty == Type::Double {
                    Value::Real(best.as_real())
                } else {
                    best
                })
            }
            Function::Floor | Function::Ceil => {
                let x = args[0].as_real();
                let v = if func == Function::Floor { x.floor_int() } else { x.ceil_int() };
                v.map(Value::Int).ok_or(self.overflow())
            }
            Function::Pow => {
                if self.ty == Type::Int {
                    let (base, exp) = (args[0].as_int(), args[1].as_int());
                    let exp = u32::try_from(exp).map_err(|_| PrismError::InvalidOperation {
                        span: self.span,
                        message: format!("negative integer exponent {}", exp),
                    })?;
                    return base.checked_pow(exp).map(Value::Int).ok_or(self.overflow());
                }
                let (base, exp) = (args[0].as_real(), args[1].as_real());
                base.powf(&exp).map(Value::Real).ok_or_else(|| PrismError::InvalidOperation {
                    span: self.span,
                    message: format!(
                        "pow({}, {}) has no {} value",
                        base.to_canonical(),
                        exp.to_canonical(),
                        if T::EXACT { "exact rational" } else { "finite" }
                    ),
                })
            }
            Function::Mod => {
                let (a, b) = (args[0].as_int(), args[1].as_int());
                if b == 0 {
                    return Err(PrismError::DivisionByZero { span: self.span });
                }
                Ok(Value::Int(a.rem_euclid(b)))
            }
        }
    }

    /// Folds the node if all children are constants.
    fn folded(self) -> Result<Self, PrismError> {
        let closed = match &self.node {
            Node::Value(_) | Node::Var(_) => false,
            Node::Unary(_, e) => e.constant().is_some(),
            Node::Binary(_, l, r) => l.constant().is_some() && r.constant().is_some(),
            Node::Call(_, args) => args.iter().all(|a| a.constant().is_some()),
        };
        if closed {
            let value = self.eval(&[])?;
            Ok(TypedExpr::value(value, self.span))
        } else {
            Ok(self)
        }
    }
}

fn compare<X: PartialOrd>(op: BinaryOp, x: &X, y: &X) -> bool {
    match op {
        BinaryOp::Eq => x == y,
        BinaryOp::Neq => x != y,
        BinaryOp::Lt => x < y,
        BinaryOp::Le => x <= y,
        BinaryOp::Gt => x > y,
        BinaryOp::Ge => x >= y,
        _ => unreachable!("not a comparison"),
    }
}

type Lookup<'a, T> = dyn FnMut(&str, Span) -> Result<TypedExpr<T>, PrismError> + 'a;

fn mismatch<X>(span: Span, message: String) -> Result<X, PrismError> {
    Err(PrismError::TypeMismatch { span, message })
}

/// Types `expr`, resolving identifiers through `lookup`.
fn type_expr<T: Scalar>(expr: &Expr, lookup: &mut Lookup<'_, T>) -> Result<TypedExpr<T>, PrismError> {
    let span = expr.span;
    let typed = match &expr.kind {
        ExprKind::Bool(b) => return Ok(TypedExpr::value(Value::Bool(*b), span)),
        ExprKind::Int(i) => return Ok(TypedExpr::value(Value::Int(*i), span)),
        ExprKind::Real(text) => {
            let v = T::parse_literal(text).ok_or_else(|| PrismError::Syntax {
                span,
                expected: "a finite number".into(),
                found: text.clone(),
            })?;
            return Ok(TypedExpr::value(Value::Real(v), span));
        }
        ExprKind::Ident(name) => return lookup(name, span),
        ExprKind::Unary(op, inner) => {
            let e = type_expr(inner, lookup)?;
            let ty = match (op, e.ty) {
                (UnaryOp::Not, Type::Bool) => Type::Bool,
                (UnaryOp::Neg, t) if t.is_numeric() => t,
                (UnaryOp::Not, t) => return mismatch(span, format!("`!` applied to {}", t)),
                (UnaryOp::Neg, t) => return mismatch(span, format!("`-` applied to {}", t)),
            };
            TypedExpr {
                ty,
                node: Node::Unary(*op, Box::new(e)),
                span,
            }
        }
        ExprKind::Binary(op, l, r) => {
            let l = type_expr(l, lookup)?;
            let r = type_expr(r, lookup)?;
            let ty = match op {
                BinaryOp::And | BinaryOp::Or => {
                    if l.ty != Type::Bool || r.ty != Type::Bool {
                        return mismatch(
                            span,
                            format!("`{}` needs bool operands, found {} and {}", op.symbol(), l.ty, r.ty),
                        );
                    }
                    Type::Bool
                }
                BinaryOp::Eq | BinaryOp::Neq => {
                    if (l.ty == Type::Bool) != (r.ty == Type::Bool) {
                        return mismatch(span, format!("cannot compare {} with {}", l.ty, r.ty));
                    }
                    Type::Bool
                }
                _ => {
                    if !l.ty.is_numeric() || !r.ty.is_numeric() {
                        return mismatch(
                            span,
                            format!("`{}` needs numeric operands, found {} and {}", op.symbol(), l.ty, r.ty),
                        );
                    }
                    match op {
                        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => Type::Bool,
                        BinaryOp::Div => Type::Double,
                        _ if l.ty == Type::Int && r.ty == Type::Int => Type::Int,
                        _ => Type::Double,
                    }
                }
            };
            TypedExpr {
                ty,
                node: Node::Binary(*op, Box::new(l), Box::new(r)),
                span,
            }
        }
        ExprKind::Call(func, args) => {
            let args = args.iter().map(|a| type_expr(a, lookup)).collect::<Result<Vec<_>, _>>()?;
            let arity_ok = match func {
                Function::Min | Function::Max => args.len() >= 2,
                Function::Floor | Function::Ceil => args.len() == 1,
                Function::Pow | Function::Mod => args.len() == 2,
            };
            if !arity_ok {
                return mismatch(span, format!("wrong number of arguments to `{}`", func.name()));
            }
            if let Some(a) = args.iter().find(|a| !a.ty.is_numeric()) {
                return mismatch(a.span, format!("`{}` needs numeric arguments", func.name()));
            }
            let all_int = args.iter().all(|a| a.ty == Type::Int);
            let ty = match func {
                Function::Floor | Function::Ceil => Type::Int,
                Function::Mod if !all_int => {
                    return mismatch(span, "`mod` needs int arguments".into())
                }
                _ if all_int => Type::Int,
                _ => Type::Double,
            };
            TypedExpr {
                ty,
                node: Node::Call(*func, args),
                span,
            }
        }
    };
    typed.folded()
}

/// A program variable. Booleans occupy the range 0..=1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub module: usize,
    pub boolean: bool,
    pub low: i64,
    pub high: i64,
}

/// Names visible to expressions after type checking.
#[derive(Clone, Debug, PartialEq)]
pub struct Scope<T> {
    variables: Vec<Variable>,
    var_index: HashMap<String, usize>,
    constants: BTreeMap<String, Value<T>>,
    formulas: HashMap<String, TypedExpr<T>>,
}

impl<T: Scalar> Scope<T> {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn constants(&self) -> &BTreeMap<String, Value<T>> {
        &self.constants
    }

    /// Type checks an expression over the program's variables, constants and
    /// formulas, e.g. a state predicate from a property.
    pub fn check(&self, expr: &Expr) -> Result<TypedExpr<T>, PrismError> {
        type_expr(expr, &mut |name, span| self.lookup(name, span))
    }

    fn lookup(&self, name: &str, span: Span) -> Result<TypedExpr<T>, PrismError> {
        if let Some(&slot) = self.var_index.get(name) {
            let v = &self.variables[slot];
            return Ok(TypedExpr {
                ty: if v.boolean { Type::Bool } else { Type::Int },
                node: Node::Var(slot),
                span,
            });
        }
        if let Some(value) = self.constants.get(name) {
            return Ok(TypedExpr::value(value.clone(), span));
        }
        if let Some(f) = self.formulas.get(name) {
            return Ok(f.clone());
        }
        Err(PrismError::UnknownIdentifier {
            span,
            name: name.to_string(),
        })
    }

    /// Renders a state vector as `(x=1, b=true)`.
    pub fn describe(&self, state: &[i64]) -> String {
        let parts: Vec<String> = self
            .variables
            .iter()
            .zip(state)
            .map(|(v, &x)| {
                if v.boolean {
                    format!("{}={}", v.name, x != 0)
                } else {
                    format!("{}={}", v.name, x)
                }
            })
            .collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedUpdate<T> {
    pub weight: TypedExpr<T>,
    /// (variable slot, new value)
    pub assignments: Vec<(usize, TypedExpr<T>)>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedCommand<T> {
    pub action: Option<String>,
    pub guard: TypedExpr<T>,
    pub updates: Vec<TypedUpdate<T>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedModule<T> {
    pub name: String,
    pub commands: Vec<TypedCommand<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypedRewardItem<T> {
    State {
        guard: TypedExpr<T>,
        value: TypedExpr<T>,
    },
    Action {
        action: Option<String>,
        guard: TypedExpr<T>,
        value: TypedExpr<T>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedRewardBlock<T> {
    pub name: String,
    pub items: Vec<TypedRewardItem<T>>,
}

/// A program ready for exploration.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedProgram<T> {
    pub model_type: ModelKind,
    pub scope: Scope<T>,
    pub modules: Vec<TypedModule<T>>,
    pub labels: Vec<(String, TypedExpr<T>)>,
    pub rewards: Vec<TypedRewardBlock<T>>,
    pub initial_state: Vec<i64>,
}

struct Resolver<'p, T> {
    scope: Scope<T>,
    consts: HashMap<&'p str, (&'p ConstDecl, Option<Expr>)>,
    formulas: HashMap<&'p str, &'p FormulaDecl>,
    variable_names: HashSet<&'p str>,
    /// Definitions being resolved, for cycle detection.
    active: Vec<String>,
    /// Variables may not be referenced while this is set.
    constant_context: bool,
}

impl<'p, T: Scalar> Resolver<'p, T> {
    fn check(&mut self, expr: &Expr) -> Result<TypedExpr<T>, PrismError> {
        type_expr(expr, &mut |name, span| self.lookup(name, span))
    }

    fn check_constant(&mut self, expr: &Expr) -> Result<Value<T>, PrismError> {
        let saved = std::mem::replace(&mut self.constant_context, true);
        let typed = self.check(expr);
        self.constant_context = saved;
        let typed = typed?;
        match typed.constant() {
            Some(v) => Ok(v.clone()),
            None => Err(PrismError::InvalidDeclaration {
                span: expr.span,
                message: format!("`{}` is not constant", expr),
            }),
        }
    }

    fn lookup(&mut self, name: &str, span: Span) -> Result<TypedExpr<T>, PrismError> {
        if self.variable_names.contains(name) && self.constant_context {
            return Err(PrismError::InvalidDeclaration {
                span,
                message: format!("variable `{}` used where a constant is required", name),
            });
        }
        if let Ok(found) = self.scope.lookup(name, span) {
            return Ok(found);
        }
        if self.active.iter().any(|a| a == name) {
            return Err(PrismError::CyclicFormula { name: name.to_string() });
        }
        if let Some((decl, binding)) = self.consts.get(name).cloned() {
            self.active.push(name.to_string());
            let value = self.resolve_constant(decl, binding.as_ref());
            self.active.pop();
            let value = value?;
            self.scope.constants.insert(name.to_string(), value.clone());
            return Ok(TypedExpr::value(value, span));
        }
        if let Some(decl) = self.formulas.get(name).copied() {
            self.active.push(name.to_string());
            let typed = self.check(&decl.expr);
            self.active.pop();
            let typed = typed?;
            self.scope.formulas.insert(name.to_string(), typed.clone());
            return Ok(typed);
        }
        Err(PrismError::UnknownIdentifier {
            span,
            name: name.to_string(),
        })
    }

    fn resolve_constant(&mut self, decl: &ConstDecl, binding: Option<&Expr>) -> Result<Value<T>, PrismError> {
        let expr = match (binding, &decl.value) {
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => {
                return Err(PrismError::UndefinedConstant {
                    name: decl.name.clone(),
                })
            }
        };
        let saved = std::mem::replace(&mut self.constant_context, true);
        let value = self.check_constant(expr);
        self.constant_context = saved;
        let value = value?;
        Ok(match (decl.ty, value) {
            (ConstType::Int, v @ Value::Int(_)) | (ConstType::Bool, v @ Value::Bool(_)) => v,
            (ConstType::Double, v) if v.ty().is_numeric() => Value::Real(v.as_real()),
            (ty, v) => {
                return mismatch(
                    expr.span,
                    format!("constant `{}` declared {:?} but given a {} value", decl.name, ty, v.ty()),
                )
            }
        })
    }
}

fn duplicate(name: &str, span: Span) -> PrismError {
    PrismError::DuplicateName {
        span,
        name: name.to_string(),
    }
}

/// Resolves names, checks types and evaluates constants.
///
/// `bindings` gives values (as expression text) to constants declared
/// without one; every such constant must be bound.
pub fn typecheck<T: Scalar>(
    program: &Program,
    bindings: &BTreeMap<String, String>,
) -> Result<TypedProgram<T>, PrismError> {
    let mut seen: HashMap<&str, Span> = HashMap::new();
    let idents = program
        .constants
        .iter()
        .map(|c| (c.name.as_str(), c.span))
        .chain(program.formulas.iter().map(|f| (f.name.as_str(), f.span)))
        .chain(
            program
                .modules
                .iter()
                .flat_map(|m| m.variables.iter().map(|v| (v.name.as_str(), v.span))),
        )
        .chain(program.labels.iter().map(|l| (l.name.as_str(), l.span)));
    for (name, span) in idents {
        if seen.insert(name, span).is_some() || name == "init" || name == "deadlock" {
            return Err(duplicate(name, span));
        }
    }
    let mut reward_names = HashSet::new();
    for block in &program.rewards {
        if !reward_names.insert(block.name.as_str()) {
            return Err(duplicate(&block.name, block.span));
        }
    }
    let mut module_names = HashSet::new();
    for m in &program.modules {
        if !module_names.insert(m.name.as_str()) {
            return Err(duplicate(&m.name, m.span));
        }
    }

    let mut consts = HashMap::new();
    for c in &program.constants {
        consts.insert(c.name.as_str(), (c, None));
    }
    for (name, text) in bindings {
        let entry = consts.get_mut(name.as_str()).ok_or_else(|| PrismError::InvalidBinding {
            name: name.clone(),
            message: "no such constant".into(),
        })?;
        if entry.0.value.is_some() {
            return Err(PrismError::InvalidBinding {
                name: name.clone(),
                message: "constant already has a value in the model".into(),
            });
        }
        let expr = parse_expression(text).map_err(|e| PrismError::InvalidBinding {
            name: name.clone(),
            message: e.to_string(),
        })?;
        entry.1 = Some(expr);
    }

    let mut r = Resolver {
        scope: Scope {
            variables: Vec::new(),
            var_index: HashMap::new(),
            constants: BTreeMap::new(),
            formulas: HashMap::new(),
        },
        consts,
        formulas: program.formulas.iter().map(|f| (f.name.as_str(), f)).collect(),
        variable_names: program
            .modules
            .iter()
            .flat_map(|m| m.variables.iter().map(|v| v.name.as_str()))
            .collect(),
        active: Vec::new(),
        constant_context: false,
    };
    for c in &program.constants {
        r.lookup(&c.name, c.span)?;
    }

    let mut initial_state = Vec::new();
    for (module, m) in program.modules.iter().enumerate() {
        for v in &m.variables {
            let (boolean, low, high) = match &v.ty {
                VarType::Bool => (true, 0, 1),
                VarType::Range(lo, hi) => {
                    let bound = |r: &mut Resolver<'_, T>, e: &Expr| match r.check_constant(e)? {
                        Value::Int(i) => Ok(i),
                        other => mismatch(e.span, format!("variable bound must be int, found {}", other.ty())),
                    };
                    let low = bound(&mut r, lo)?;
                    let high = bound(&mut r, hi)?;
                    if low > high {
                        return Err(PrismError::InvalidDeclaration {
                            span: v.span,
                            message: format!("`{}` has empty range [{}..{}]", v.name, low, high),
                        });
                    }
                    (false, low, high)
                }
            };
            let init = match &v.init {
                None => low,
                Some(e) => match (boolean, r.check_constant(e)?) {
                    (true, Value::Bool(b)) => i64::from(b),
                    (false, Value::Int(i)) => i,
                    (_, other) => {
                        return mismatch(
                            e.span,
                            format!("initial value of `{}` has type {}", v.name, other.ty()),
                        )
                    }
                },
            };
            if init < low || init > high {
                return Err(PrismError::InvalidDeclaration {
                    span: v.span,
                    message: format!("initial value {} of `{}` outside [{}..{}]", init, v.name, low, high),
                });
            }
            r.scope.var_index.insert(v.name.clone(), r.scope.variables.len());
            r.scope.variables.push(Variable {
                name: v.name.clone(),
                module,
                boolean,
                low,
                high,
            });
            initial_state.push(init);
        }
    }
    for f in &program.formulas {
        r.lookup(&f.name, f.span)?;
    }

    let expect_bool = |e: &TypedExpr<T>, what: &str| {
        if e.ty == Type::Bool {
            Ok(())
        } else {
            mismatch(e.span, format!("{} must be bool, found {}", what, e.ty))
        }
    };
    let expect_number = |e: &TypedExpr<T>, what: &str| {
        if e.ty.is_numeric() {
            Ok(())
        } else {
            mismatch(e.span, format!("{} must be numeric, found {}", what, e.ty))
        }
    };

    let mut modules = Vec::new();
    for (module, m) in program.modules.iter().enumerate() {
        let mut commands = Vec::new();
        for c in &m.commands {
            let guard = r.check(&c.guard)?;
            expect_bool(&guard, "guard")?;
            let mut updates = Vec::new();
            for u in &c.updates {
                let weight = match &u.weight {
                    Some(w) => r.check(w)?,
                    None => TypedExpr::value(Value::Int(1), u.span),
                };
                expect_number(&weight, "update weight")?;
                let mut assignments = Vec::new();
                let mut assigned = HashSet::new();
                for a in &u.assignments {
                    let slot = r.scope.variable_index(&a.var).ok_or_else(|| PrismError::UnknownIdentifier {
                        span: a.span,
                        name: a.var.clone(),
                    })?;
                    let var = &r.scope.variables[slot];
                    if var.module != module {
                        return Err(PrismError::InvalidDeclaration {
                            span: a.span,
                            message: format!(
                                "module `{}` assigns `{}`, which belongs to module `{}`",
                                m.name, a.var, program.modules[var.module].name
                            ),
                        });
                    }
                    if !assigned.insert(slot) {
                        return Err(PrismError::InvalidDeclaration {
                            span: a.span,
                            message: format!("`{}` assigned twice in one update", a.var),
                        });
                    }
                    let boolean = var.boolean;
                    let value = r.check(&a.expr)?;
                    let ok = if boolean { value.ty == Type::Bool } else { value.ty == Type::Int };
                    if !ok {
                        return mismatch(
                            a.expr.span,
                            format!(
                                "`{}` is {} but is assigned a {} value",
                                a.var,
                                if boolean { Type::Bool } else { Type::Int },
                                value.ty
                            ),
                        );
                    }
                    assignments.push((slot, value));
                }
                updates.push(TypedUpdate {
                    weight,
                    assignments,
                    span: u.span,
                });
            }
            commands.push(TypedCommand {
                action: c.action.clone(),
                guard,
                updates,
                span: c.span,
            });
        }
        modules.push(TypedModule {
            name: m.name.clone(),
            commands,
        });
    }

    let mut labels = Vec::new();
    for l in &program.labels {
        let e = r.check(&l.expr)?;
        expect_bool(&e, "label")?;
        labels.push((l.name.clone(), e));
    }

    let mut rewards = Vec::new();
    for block in &program.rewards {
        let mut items = Vec::new();
        for item in &block.items {
            let (action, guard, value) = match item {
                RewardItem::State { guard, value } => (None, guard, value),
                RewardItem::Action { action, guard, value } => (Some(action.clone()), guard, value),
            };
            let guard = r.check(guard)?;
            expect_bool(&guard, "reward guard")?;
            let value = r.check(value)?;
            expect_number(&value, "reward")?;
            items.push(match action {
                None => TypedRewardItem::State { guard, value },
                Some(action) => TypedRewardItem::Action { action, guard, value },
            });
        }
        rewards.push(TypedRewardBlock {
            name: block.name.clone(),
            items,
        });
    }

    Ok(TypedProgram {
        model_type: program.model_type,
        scope: r.scope,
        modules,
        labels,
        rewards,
        initial_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::parser::parse_program;
    use crate::scalar::Rational;

    fn program(src: &str) -> Program {
        parse_program(src).unwrap()
    }

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    const SMALL: &str = "dtmc const double p; module m x:[0..3] init 0; b:bool init false;
        [] x<2 & b -> p : (x'=x+1) + 1-p : true; endmodule";

    #[test]
    fn guard_is_bool() {
        let t = typecheck::<f64>(&program(SMALL), &bind(&[("p", "0.3")])).unwrap();
        assert_eq!(t.modules[0].commands[0].guard.ty(), Type::Bool);
    }

    #[test]
    fn bound_constant_folds_into_weight() {
        let t = typecheck::<f64>(&program(SMALL), &bind(&[("p", "0.3")])).unwrap();
        let w = &t.modules[0].commands[0].updates[0].weight;
        assert_eq!(w.ty(), Type::Double);
        assert_eq!(w.constant(), Some(&Value::Real(0.3)));
        let w = &t.modules[0].commands[0].updates[1].weight;
        assert_eq!(w.constant(), Some(&Value::Real(1.0 - 0.3)));
    }

    #[test]
    fn exact_constants_stay_exact() {
        let t = typecheck::<Rational>(&program(SMALL), &bind(&[("p", "1/3")])).unwrap();
        let w = &t.modules[0].commands[0].updates[1].weight;
        assert_eq!(w.constant().unwrap().to_string(), "2/3");
    }

    #[test]
    fn and_of_int_is_a_mismatch() {
        let p = program("dtmc module m x:[0..1]; [] x & 1 -> true; endmodule");
        assert!(matches!(
            typecheck::<f64>(&p, &BTreeMap::new()),
            Err(PrismError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn unbound_constant() {
        assert_eq!(
            typecheck::<f64>(&program(SMALL), &BTreeMap::new()),
            Err(PrismError::UndefinedConstant { name: "p".into() })
        );
    }

    #[test]
    fn cyclic_formulas() {
        let p = program("dtmc formula a = b + 1; formula b = a; module m x:[0..1]; [] true -> true; endmodule");
        assert!(matches!(
            typecheck::<f64>(&p, &BTreeMap::new()),
            Err(PrismError::CyclicFormula { .. })
        ));
    }

    #[test]
    fn int_never_receives_double() {
        let p = program("dtmc module m x:[0..1]; [] true -> (x'=x/1); endmodule");
        assert!(matches!(
            typecheck::<f64>(&p, &BTreeMap::new()),
            Err(PrismError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn foreign_assignment_rejected() {
        let p = program(
            "dtmc module a x:[0..1]; [] true -> (y'=1); endmodule module b y:[0..1]; [] true -> true; endmodule",
        );
        assert!(matches!(
            typecheck::<f64>(&p, &BTreeMap::new()),
            Err(PrismError::InvalidDeclaration { .. })
        ));
    }

    fn eval(src: &str, state: &[i64]) -> Result<Value<f64>, PrismError> {
        let p = program("dtmc const int k = 7; module m x:[0..9]; [] true -> true; endmodule");
        let t = typecheck::<f64>(&p, &BTreeMap::new())?;
        t.scope.check(&parse_expression(src)?)?.eval(state)
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval("1+2*3", &[0]).unwrap(), Value::Int(7));
        assert_eq!(eval("min(x,4)", &[7]).unwrap(), Value::Int(4));
        assert_eq!(eval("min(x,4.5)", &[7]).unwrap(), Value::Real(4.5));
        assert_eq!(eval("max(x,k,2)", &[3]).unwrap(), Value::Int(7));
        assert_eq!(eval("floor(x/2)", &[7]).unwrap(), Value::Int(3));
        assert_eq!(eval("ceil(x/2)", &[7]).unwrap(), Value::Int(4));
        assert_eq!(eval("pow(x,2)", &[3]).unwrap(), Value::Int(9));
        assert_eq!(eval("pow(x,0.5)", &[4]).unwrap(), Value::Real(2.0));
        assert_eq!(eval("mod(x-9,4)", &[2]).unwrap(), Value::Int(1));
        assert!(matches!(eval("x/0", &[3]), Err(PrismError::DivisionByZero { .. })));
        assert!(matches!(eval("mod(x,0)", &[3]), Err(PrismError::DivisionByZero { .. })));
    }

    #[test]
    fn scope_checks_predicates() {
        let t = typecheck::<f64>(&program(SMALL), &bind(&[("p", "0.5")])).unwrap();
        let e = t.scope.check(&parse_expression("x=1 & !b").unwrap()).unwrap();
        assert!(e.eval_bool(&[1, 0]).unwrap());
        assert!(!e.eval_bool(&[1, 1]).unwrap());
        assert!(matches!(
            t.scope.check(&parse_expression("y=1").unwrap()),
            Err(PrismError::UnknownIdentifier { .. })
        ));
        assert_eq!(t.scope.describe(&[2, 1]), "(x=2, b=true)");
    }

    #[test]
    fn bindings_are_validated() {
        let p = program(SMALL);
        assert!(matches!(
            typecheck::<f64>(&p, &bind(&[("p", "0.5"), ("q", "1")])),
            Err(PrismError::InvalidBinding { .. })
        ));
        assert!(matches!(
            typecheck::<f64>(&p, &bind(&[("p", "true")])),
            Err(PrismError::TypeMismatch { .. })
        ));
    }
}
