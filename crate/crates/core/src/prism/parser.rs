//! Recursive-descent parser for programs and expressions.

use super::ast::*;
use super::lexer::{tokenize, Span, Tok, Token};
use super::PrismError;
use crate::model::ModelKind;

/// Cursor over a token stream. The property parser reuses it for embedded
/// expressions.
pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        debug_assert!(matches!(tokens.last(), Some(Token { tok: Tok::Eof, .. })));
        Parser { tokens, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn rewind(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub(crate) fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    pub(crate) fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn error<X>(&self, expected: &str) -> Result<X, PrismError> {
        Err(PrismError::Syntax {
            span: self.span(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        })
    }

    pub(crate) fn expect(&mut self, tok: &Tok) -> Result<Span, PrismError> {
        if self.peek() == tok {
            Ok(self.advance().span)
        } else {
            self.error(&format!("`{}`", tok))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<(String, Span), PrismError> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.advance().span)),
            _ => self.error("an identifier"),
        }
    }

    fn string(&mut self) -> Result<String, PrismError> {
        match self.peek().clone() {
            Tok::Str(text) => {
                self.advance();
                Ok(text)
            }
            _ => self.error("a quoted name"),
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, PrismError> {
        let mut left = self.and_expr()?;
        while self.peek() == &Tok::Or {
            let span = self.advance().span;
            let right = self.and_expr()?;
            left = binary(BinaryOp::Or, left, right, span);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, PrismError> {
        let mut left = self.not_expr()?;
        while self.peek() == &Tok::And {
            let span = self.advance().span;
            let right = self.not_expr()?;
            left = binary(BinaryOp::And, left, right, span);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, PrismError> {
        if self.peek() == &Tok::Not {
            let span = self.advance().span;
            let inner = self.not_expr()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Not, Box::new(inner)), span));
        }
        self.relational()
    }

    fn relational(&mut self) -> Result<Expr, PrismError> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinaryOp::Eq,
            Tok::Neq => BinaryOp::Neq,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return Ok(left),
        };
        let span = self.advance().span;
        let right = self.additive()?;
        Ok(binary(op, left, right, span))
    }

    fn additive(&mut self) -> Result<Expr, PrismError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            let span = self.advance().span;
            let right = self.multiplicative()?;
            left = binary(op, left, right, span);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, PrismError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            let span = self.advance().span;
            let right = self.unary()?;
            left = binary(op, left, right, span);
        }
    }

    fn unary(&mut self) -> Result<Expr, PrismError> {
        if self.peek() == &Tok::Minus {
            let span = self.advance().span;
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Neg, Box::new(inner)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, PrismError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::Num(text) => {
                self.advance();
                ExprKind::Real(text)
            }
            Tok::KwTrue => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::KwFalse => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Ident(name) => {
                self.advance();
                match Function::from_name(&name) {
                    Some(func) if self.peek() == &Tok::LParen => {
                        self.advance();
                        let mut args = vec![self.expr()?];
                        while self.eat(&Tok::Comma) {
                            args.push(self.expr()?);
                        }
                        self.expect(&Tok::RParen)?;
                        ExprKind::Call(func, args)
                    }
                    _ => ExprKind::Ident(name),
                }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                return Ok(inner);
            }
            _ => return self.error("an expression"),
        };
        Ok(Expr::new(kind, span))
    }

    fn program(&mut self) -> Result<Program, PrismError> {
        let model_type = match self.peek() {
            Tok::KwDtmc => ModelKind::Dtmc,
            Tok::KwCtmc => ModelKind::Ctmc,
            Tok::KwMdp => ModelKind::Mdp,
            _ => return self.error("`dtmc`, `ctmc` or `mdp`"),
        };
        self.advance();
        let mut program = Program {
            model_type,
            constants: Vec::new(),
            formulas: Vec::new(),
            modules: Vec::new(),
            labels: Vec::new(),
            rewards: Vec::new(),
        };
        loop {
            let span = self.span();
            match self.peek() {
                Tok::KwConst => {
                    self.advance();
                    let ty = match self.peek() {
                        Tok::KwInt => ConstType::Int,
                        Tok::KwDouble => ConstType::Double,
                        Tok::KwBool => ConstType::Bool,
                        _ => return self.error("`int`, `double` or `bool`"),
                    };
                    self.advance();
                    let (name, _) = self.ident()?;
                    let value = if self.eat(&Tok::Eq) { Some(self.expr()?) } else { None };
                    self.expect(&Tok::Semi)?;
                    program.constants.push(ConstDecl { name, ty, value, span });
                }
                Tok::KwFormula => {
                    self.advance();
                    let (name, _) = self.ident()?;
                    self.expect(&Tok::Eq)?;
                    let expr = self.expr()?;
                    self.expect(&Tok::Semi)?;
                    program.formulas.push(FormulaDecl { name, expr, span });
                }
                Tok::KwLabel => {
                    self.advance();
                    let name = self.string()?;
                    self.expect(&Tok::Eq)?;
                    let expr = self.expr()?;
                    self.expect(&Tok::Semi)?;
                    program.labels.push(LabelDecl { name, expr, span });
                }
                Tok::KwModule => program.modules.push(self.module()?),
                Tok::KwRewards => program.rewards.push(self.reward_block()?),
                Tok::Eof => return Ok(program),
                _ => return self.error("`const`, `formula`, `label`, `module` or `rewards`"),
            }
        }
    }

    fn module(&mut self) -> Result<Module, PrismError> {
        let span = self.expect(&Tok::KwModule)?;
        let (name, _) = self.ident()?;
        let mut variables = Vec::new();
        while matches!(self.peek(), Tok::Ident(_)) {
            variables.push(self.var_decl()?);
        }
        let mut commands = Vec::new();
        while self.peek() == &Tok::LBracket {
            commands.push(self.command()?);
        }
        if self.peek() != &Tok::KwEndModule {
            return self.error(if commands.is_empty() {
                "a variable declaration, a command or `endmodule`"
            } else {
                "a command or `endmodule`"
            });
        }
        self.advance();
        Ok(Module {
            name,
            variables,
            commands,
            span,
        })
    }

    fn var_decl(&mut self) -> Result<VarDecl, PrismError> {
        let (name, span) = self.ident()?;
        self.expect(&Tok::Colon)?;
        let ty = if self.eat(&Tok::KwBool) {
            VarType::Bool
        } else {
            self.expect(&Tok::LBracket)?;
            let lo = self.expr()?;
            self.expect(&Tok::DotDot)?;
            let hi = self.expr()?;
            self.expect(&Tok::RBracket)?;
            VarType::Range(lo, hi)
        };
        let init = if self.eat(&Tok::KwInit) { Some(self.expr()?) } else { None };
        self.expect(&Tok::Semi)?;
        Ok(VarDecl { name, ty, init, span })
    }

    fn action_label(&mut self) -> Result<Option<String>, PrismError> {
        self.expect(&Tok::LBracket)?;
        let action = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?.0),
            _ => None,
        };
        self.expect(&Tok::RBracket)?;
        Ok(action)
    }

    fn command(&mut self) -> Result<Command, PrismError> {
        let span = self.span();
        let action = self.action_label()?;
        let guard = self.expr()?;
        self.expect(&Tok::Arrow)?;
        let mut updates = vec![self.update()?];
        while self.eat(&Tok::Plus) {
            updates.push(self.update()?);
        }
        self.expect(&Tok::Semi)?;
        Ok(Command {
            action,
            guard,
            updates,
            span,
        })
    }

    fn starts_assignments(&self) -> bool {
        match self.peek() {
            Tok::KwTrue => matches!(self.peek_at(1), Tok::Semi | Tok::Plus),
            Tok::LParen => {
                matches!(self.peek_at(1), Tok::Ident(_)) && self.peek_at(2) == &Tok::Prime
            }
            _ => false,
        }
    }

    fn update(&mut self) -> Result<Update, PrismError> {
        let span = self.span();
        let weight = if self.starts_assignments() {
            None
        } else {
            let w = self.expr()?;
            self.expect(&Tok::Colon)?;
            Some(w)
        };
        let mut assignments = Vec::new();
        if !self.eat(&Tok::KwTrue) {
            loop {
                let span = self.expect(&Tok::LParen)?;
                let (var, _) = self.ident()?;
                self.expect(&Tok::Prime)?;
                self.expect(&Tok::Eq)?;
                let expr = self.expr()?;
                self.expect(&Tok::RParen)?;
                assignments.push(Assignment { var, expr, span });
                if !self.eat(&Tok::And) {
                    break;
                }
            }
        }
        Ok(Update {
            weight,
            assignments,
            span,
        })
    }

    fn reward_block(&mut self) -> Result<RewardBlock, PrismError> {
        let span = self.expect(&Tok::KwRewards)?;
        let name = self.string()?;
        let mut items = Vec::new();
        while self.peek() != &Tok::KwEndRewards {
            if self.peek() == &Tok::Eof {
                return self.error("a reward item or `endrewards`");
            }
            let action = if self.peek() == &Tok::LBracket {
                Some(self.action_label()?)
            } else {
                None
            };
            let guard = self.expr()?;
            self.expect(&Tok::Colon)?;
            let value = self.expr()?;
            self.expect(&Tok::Semi)?;
            items.push(match action {
                Some(action) => RewardItem::Action {
                    action,
                    guard,
                    value,
                },
                None => RewardItem::State { guard, value },
            });
        }
        self.advance();
        Ok(RewardBlock { name, items, span })
    }
}

fn binary(op: BinaryOp, left: Expr, right: Expr, span: Span) -> Expr {
    Expr::new(ExprKind::Binary(op, Box::new(left), Box::new(right)), span)
}

/// Parses a complete program.
pub fn parse_program(text: &str) -> Result<Program, PrismError> {
    Parser::new(tokenize(text)?).program()
}

/// Parses a standalone expression, e.g. a constant value or a state predicate.
pub fn parse_expression(text: &str) -> Result<Expr, PrismError> {
    let mut parser = Parser::new(tokenize(text)?);
    let expr = parser.expr()?;
    if parser.peek() != &Tok::Eof {
        return parser.error("end of expression");
    }
    Ok(expr)
}
