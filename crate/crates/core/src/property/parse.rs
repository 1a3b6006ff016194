use super::*;
use crate::prism::ast::ExprKind;
use crate::prism::parser::Parser;
use crate::prism::{tokenize, Tok};

struct PropertyParser {
    p: Parser,
}

impl PropertyParser {
    fn error<X>(&self, expected: &str) -> Result<X, PropertyError> {
        match self.p.error::<X>(expected) {
            Err(e) => Err(e.into()),
            Ok(_) => unreachable!("parser errors always fail"),
        }
    }

    fn keyword(&self) -> Option<&str> {
        match self.p.peek() {
            Tok::Ident(name) => Some(name.as_str()),
            _ => None,
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), PropertyError> {
        self.p.expect(tok)?;
        Ok(())
    }

    fn number(&mut self) -> Result<String, PropertyError> {
        match self.p.peek().clone() {
            Tok::Int(v) => {
                self.p.advance();
                Ok(v.to_string())
            }
            Tok::Num(text) => {
                self.p.advance();
                Ok(text)
            }
            _ => self.error("a number"),
        }
    }

    fn bound(&mut self, nested: bool) -> Result<Bound, PropertyError> {
        let op = match self.p.peek() {
            Tok::Eq if self.p.peek_at(1) == &Tok::Question => {
                if nested {
                    return self.error("a comparison (`=?` is only allowed on the outermost operator)");
                }
                self.p.advance();
                self.p.advance();
                return Ok(Bound::Query);
            }
            Tok::Lt => RelOp::Lt,
            Tok::Le => RelOp::Le,
            Tok::Gt => RelOp::Gt,
            Tok::Ge => RelOp::Ge,
            _ => return self.error("`=?` or a comparison"),
        };
        self.p.advance();
        Ok(Bound::Compare(op, self.number()?))
    }

    fn step_bound(&mut self) -> Result<Option<StepBound>, PropertyError> {
        if self.p.eat(&Tok::Le) {
            Ok(Some(StepBound(self.number()?)))
        } else {
            Ok(None)
        }
    }

    fn property(&mut self) -> Result<Property, PropertyError> {
        let prop = match self.keyword() {
            Some("P" | "Pmin" | "Pmax") => Property::Prob(self.prob_operator(false)?),
            Some("R" | "Rmin" | "Rmax") => Property::Reward(self.reward_operator(false)?),
            _ => return self.error("a P or R operator"),
        };
        if self.p.peek() != &Tok::Eof {
            return self.error("end of property");
        }
        Ok(prop)
    }

    fn prob_operator(&mut self, nested: bool) -> Result<ProbOperator, PropertyError> {
        let optimum = match self.keyword() {
            Some("Pmin") => Some(Optimum::Min),
            Some("Pmax") => Some(Optimum::Max),
            _ => None,
        };
        self.p.advance();
        let bound = self.bound(nested)?;
        self.expect(&Tok::LBracket)?;
        let path = self.path()?;
        let condition = if self.p.eat(&Tok::DoublePipe) {
            Some(self.path()?)
        } else {
            None
        };
        self.expect(&Tok::RBracket)?;
        Ok(ProbOperator {
            optimum,
            bound,
            path,
            condition,
        })
    }

    fn reward_name(&mut self) -> Result<Option<String>, PropertyError> {
        if !self.p.eat(&Tok::LBrace) {
            return Ok(None);
        }
        let name = match self.p.peek().clone() {
            Tok::Str(name) => {
                self.p.advance();
                name
            }
            _ => return self.error("a quoted reward structure name"),
        };
        self.expect(&Tok::RBrace)?;
        Ok(Some(name))
    }

    fn reward_operator(&mut self, nested: bool) -> Result<RewardOperator, PropertyError> {
        let mut optimum = match self.keyword() {
            Some("Rmin") => Some(Optimum::Min),
            Some("Rmax") => Some(Optimum::Max),
            _ => None,
        };
        self.p.advance();
        let reward_name = self.reward_name()?;
        // Also accept the `R{"name"}min` order.
        if optimum.is_none() && reward_name.is_some() {
            match self.keyword() {
                Some("min") => optimum = Some(Optimum::Min),
                Some("max") => optimum = Some(Optimum::Max),
                _ => {}
            }
            if optimum.is_some() {
                self.p.advance();
            }
        }
        let bound = self.bound(nested)?;
        self.expect(&Tok::LBracket)?;
        let target = match self.keyword() {
            Some("F") => {
                self.p.advance();
                RewardTarget::Reach(self.state()?)
            }
            Some("C") => {
                self.p.advance();
                self.expect(&Tok::Le)?;
                RewardTarget::Cumulative(StepBound(self.number()?))
            }
            _ => return self.error("`F` or `C<=`"),
        };
        self.expect(&Tok::RBracket)?;
        Ok(RewardOperator {
            reward_name,
            optimum,
            bound,
            target,
        })
    }

    fn path(&mut self) -> Result<PathFormula, PropertyError> {
        match self.keyword() {
            Some("X") => {
                self.p.advance();
                Ok(PathFormula::Next(self.state()?))
            }
            Some("F") => {
                self.p.advance();
                let bound = self.step_bound()?;
                Ok(PathFormula::eventually(self.state()?, bound))
            }
            Some("G") => {
                self.p.advance();
                let bound = self.step_bound()?;
                Ok(PathFormula::Globally {
                    inner: self.state()?,
                    bound,
                })
            }
            _ => {
                let left = self.state()?;
                if self.keyword() != Some("U") {
                    return self.error("`U`");
                }
                self.p.advance();
                let bound = self.step_bound()?;
                let right = self.state()?;
                Ok(PathFormula::Until { left, right, bound })
            }
        }
    }

    fn state(&mut self) -> Result<StateFormula, PropertyError> {
        let mut left = self.state_and()?;
        while self.p.eat(&Tok::Or) {
            let right = self.state_and()?;
            left = StateFormula::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn state_and(&mut self) -> Result<StateFormula, PropertyError> {
        let mut left = self.state_unary()?;
        while self.p.eat(&Tok::And) {
            let right = self.state_unary()?;
            left = StateFormula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn state_unary(&mut self) -> Result<StateFormula, PropertyError> {
        if self.p.eat(&Tok::Not) {
            return Ok(StateFormula::Not(Box::new(self.state_unary()?)));
        }
        self.state_atom()
    }

    fn state_atom(&mut self) -> Result<StateFormula, PropertyError> {
        match self.p.peek().clone() {
            Tok::Str(name) => {
                self.p.advance();
                Ok(StateFormula::Label(name))
            }
            Tok::KwTrue => {
                self.p.advance();
                Ok(StateFormula::True)
            }
            Tok::KwFalse => {
                self.p.advance();
                Ok(StateFormula::False)
            }
            Tok::Not => self.state_unary(),
            Tok::LParen => {
                self.p.advance();
                let start = self.p.position();
                // A parenthesised variable predicate, if it parses as one.
                if let Ok(expr) = self.p.expr() {
                    if self.p.eat(&Tok::RParen) {
                        return Ok(match expr.kind {
                            ExprKind::Bool(true) => StateFormula::True,
                            ExprKind::Bool(false) => StateFormula::False,
                            _ => StateFormula::Predicate(expr),
                        });
                    }
                }
                self.p.rewind(start);
                let inner = self.state()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "P" | "Pmin" | "Pmax" => Ok(StateFormula::Prob(Box::new(self.prob_operator(true)?))),
                "R" | "Rmin" | "Rmax" => Ok(StateFormula::Reward(Box::new(self.reward_operator(true)?))),
                _ => self.error("a state formula (wrap variable predicates in parentheses)"),
            },
            _ => self.error("a state formula"),
        }
    }
}

/// Parses one property.
pub fn parse_property(text: &str) -> Result<Property, PropertyError> {
    let tokens = tokenize(text)?;
    PropertyParser { p: Parser::new(tokens) }.property()
}

/// Parses a property file: one property per line, `//` comments and blank
/// lines ignored. Returns each property with its source text; error
/// positions refer to lines of the file.
pub fn parse_properties(text: &str) -> Result<Vec<(String, Property)>, PropertyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split("//").next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let prop = parse_property(content).map_err(|e| match e {
            PropertyError::Syntax { span, expected, found } => PropertyError::Syntax {
                span: Span {
                    line: i + 1,
                    col: span.col + (line.len() - line.trim_start().len()),
                },
                expected,
                found,
            },
            other => other,
        })?;
        out.push((content.to_string(), prop));
    }
    Ok(out)
}
