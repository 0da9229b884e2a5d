//! Recursive-descent parsers for the modeling languages.
//!
//! Each entry point returns the tree or at least one error diagnostic.
//! Syntax errors stop the parse; structural checks that only need the
//! single source file (duplicate names, scoping inside an action, edge shape)
//! are collected after a successful parse.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{Diagnostic, Location};
use super::lexer::{tokenize, Token, TokenKind};

pub type ParseResult<T> = Result<T, Vec<Diagnostic>>;

/// Java keywords for constructs outside the action-script subset.
const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "while", "for", "if", "else", "do", "switch", "return", "try", "catch", "throw", "break",
    "continue", "synchronized", "class", "import",
];

pub fn parse_class_model(file: &str, source: &str) -> ParseResult<ClassModel> {
    let mut p = Parser::new(file, source)?;
    let model = p.class_model().map_err(|d| vec![d])?;
    let diags = check_class_model(file, &model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

pub fn parse_activity(file: &str, source: &str) -> ParseResult<ActivityModel> {
    let mut p = Parser::new(file, source)?;
    let model = p.activity().map_err(|d| vec![d])?;
    let diags = check_activity(file, &model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

/// Parses the contents of a `java : { ... }` block (without the braces).
pub fn parse_script_block(file: &str, source: &str) -> ParseResult<Vec<ScriptStmt>> {
    let mut p = Parser::new(file, source)?;
    let mut stmts = Vec::new();
    while !p.at(&TokenKind::Eof) {
        stmts.push(p.script_stmt().map_err(|d| vec![d])?);
    }
    Ok(stmts)
}

pub fn parse_page(file: &str, source: &str) -> ParseResult<PageModel> {
    let mut p = Parser::new(file, source)?;
    let model = p.page().map_err(|d| vec![d])?;
    let diags = check_page(file, &model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

pub fn parse_app(file: &str, source: &str) -> ParseResult<AppModel> {
    let mut p = Parser::new(file, source)?;
    let (model, spans) = p.app().map_err(|d| vec![d])?;
    let diags = check_app(file, &model, &spans);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

struct Parser<'a> {
    file: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn new(file: &'a str, source: &str) -> ParseResult<Self> {
        let tokens = tokenize(file, source).map_err(|d| vec![d])?;
        Ok(Parser {
            file,
            tokens,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_kind_at(&self, offset: usize) -> &TokenKind {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn span(&self) -> Span {
        let t = self.peek();
        Span::new(t.line, t.column)
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&self, code: &str, message: impl Into<String>) -> Diagnostic {
        let t = self.peek();
        Diagnostic::error(Location::new(self.file, t.line, t.column), code, message)
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        self.error_here(
            "syntax",
            format!("expected {expected}, found {}", self.peek().kind.describe()),
        )
    }

    fn expect(&mut self, kind: &TokenKind) -> PResult<Token> {
        if self.at(kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("string literal")),
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if self.at(&TokenKind::Eof) {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    /// `a, b, c` terminated by (but not consuming) `close`.
    fn ident_list(&mut self, close: &TokenKind) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if self.at(close) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if !self.eat(&TokenKind::Comma) {
                return Ok(out);
            }
        }
    }

    // -- class models --------------------------------------------------------

    fn class_model(&mut self) -> PResult<ClassModel> {
        self.expect_keyword("classdiagram")?;
        let name = self.ident()?;
        self.expect(&TokenKind::LBrace)?;
        let mut classes = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            classes.push(self.class_def()?);
        }
        self.expect_eof()?;
        Ok(ClassModel {
            name,
            classes,
            file: self.file.to_string(),
        })
    }

    fn class_def(&mut self) -> PResult<ClassDef> {
        let span = self.span();
        self.expect_keyword("class")?;
        let name = self.ident()?;
        let mut is_user = false;
        if self.eat(&TokenKind::Lt) {
            self.expect(&TokenKind::Lt)?;
            if !self.at_keyword("user") {
                return Err(self.error_here("syntax", "the only supported stereotype is <<user>>"));
            }
            self.bump();
            self.expect(&TokenKind::Gt)?;
            self.expect(&TokenKind::Gt)?;
            is_user = true;
        }
        self.expect(&TokenKind::LBrace)?;
        let mut attributes = Vec::new();
        let mut associations = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let span = self.span();
            if self.eat(&TokenKind::Arrow) {
                let role = self.ident()?;
                self.expect(&TokenKind::Colon)?;
                let target = self.ident()?;
                let multiplicity = if self.eat_keyword("one") {
                    Multiplicity::One
                } else if self.eat_keyword("many") {
                    Multiplicity::Many
                } else {
                    return Err(self.unexpected("`one` or `many`"));
                };
                self.expect(&TokenKind::Semi)?;
                associations.push(AssociationDef {
                    role,
                    target,
                    multiplicity,
                    span,
                });
            } else {
                let attr = self.ident()?;
                self.expect(&TokenKind::Colon)?;
                let ty_name = self.ident()?;
                let ty = BuiltinType::from_name(&ty_name).ok_or_else(|| {
                    Diagnostic::error(
                        Location::new(self.file, span.line, span.column),
                        "syntax",
                        format!("unknown attribute type `{ty_name}`"),
                    )
                })?;
                self.expect(&TokenKind::Semi)?;
                attributes.push(AttributeDef {
                    name: attr,
                    ty,
                    span,
                });
            }
        }
        Ok(ClassDef {
            name,
            is_user,
            attributes,
            associations,
            span,
        })
    }

    // -- activities ----------------------------------------------------------

    fn activity(&mut self) -> PResult<ActivityModel> {
        self.expect_keyword("activity")?;
        let name = self.ident()?;
        self.expect(&TokenKind::LBrace)?;
        let mut partitions = Vec::new();
        let mut actions = Vec::new();
        let mut edges = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let span = self.span();
            if self.at_keyword("role") && matches!(self.peek_kind_at(1), TokenKind::Ident(_)) {
                self.bump();
                let name = self.ident()?;
                self.expect(&TokenKind::LBrace)?;
                let names = self.ident_list(&TokenKind::RBrace)?;
                self.expect(&TokenKind::RBrace)?;
                partitions.push(Partition {
                    name,
                    actions: names,
                    span,
                });
            } else if self.at_keyword("action") && matches!(self.peek_kind_at(1), TokenKind::Ident(_)) {
                self.bump();
                actions.push(self.action(span)?);
            } else {
                edges.push(self.edge()?);
            }
        }
        self.expect_eof()?;
        Ok(ActivityModel {
            name,
            partitions,
            actions,
            edges,
            file: self.file.to_string(),
        })
    }

    fn action(&mut self, span: Span) -> PResult<ActionDef> {
        let name_span = self.span();
        let name = self.ident()?;
        if name == "initial" || name == "final" {
            return Err(Diagnostic::error(
                Location::new(self.file, name_span.line, name_span.column),
                "syntax",
                format!("`{name}` is reserved and cannot name an action"),
            ));
        }
        self.expect(&TokenKind::LBrace)?;
        let mut action = ActionDef {
            name,
            in_pins: Vec::new(),
            out_pins: Vec::new(),
            vars: Vec::new(),
            body: Vec::new(),
            span,
        };
        loop {
            let kind = if self.at_keyword("in") {
                0
            } else if self.at_keyword("out") {
                1
            } else if self.at_keyword("var") {
                2
            } else {
                break;
            };
            self.bump();
            self.expect(&TokenKind::Colon)?;
            let decls = self.typed_list()?;
            self.expect(&TokenKind::Semi)?;
            match kind {
                0 => action.in_pins.extend(decls),
                1 => action.out_pins.extend(decls),
                _ => action.vars.extend(decls),
            }
        }
        while !self.eat(&TokenKind::RBrace) {
            action.body.push(self.statement()?);
        }
        Ok(action)
    }

    fn type_ref(&mut self) -> PResult<TypeRef> {
        let name = self.ident()?;
        if name == "Set" && self.eat(&TokenKind::Lt) {
            let elem = self.ident()?;
            if BuiltinType::from_name(&elem).is_some() {
                return Err(self.error_here(
                    "syntax",
                    format!("Set elements must be classes, found builtin `{elem}`"),
                ));
            }
            self.expect(&TokenKind::Gt)?;
            return Ok(TypeRef::SetOf(elem));
        }
        Ok(match BuiltinType::from_name(&name) {
            Some(b) => TypeRef::Builtin(b),
            None => TypeRef::Class(name),
        })
    }

    fn typed_list(&mut self) -> PResult<Vec<ParamDecl>> {
        let mut out = Vec::new();
        loop {
            let span = self.span();
            let ty = self.type_ref()?;
            let name = self.ident()?;
            out.push(ParamDecl { name, ty, span });
            if !self.eat(&TokenKind::Comma) {
                return Ok(out);
            }
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let span = self.span();
        let keyword = match &self.peek().kind {
            TokenKind::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("statement (`cmd`, `view`, or `java`)")),
        };
        let kind = match keyword.as_str() {
            "cmd" => {
                self.bump();
                self.expect(&TokenKind::Colon)?;
                StatementKind::Cmd(self.command()?)
            }
            "view" => {
                self.bump();
                self.expect(&TokenKind::Colon)?;
                let page = self.ident()?;
                self.expect(&TokenKind::LParen)?;
                let args = self.ident_list(&TokenKind::RParen)?;
                self.expect(&TokenKind::RParen)?;
                StatementKind::View { page, args }
            }
            "java" => {
                self.bump();
                self.expect(&TokenKind::Colon)?;
                self.expect(&TokenKind::LBrace)?;
                let mut stmts = Vec::new();
                while !self.eat(&TokenKind::RBrace) {
                    if self.at(&TokenKind::Eof) {
                        return Err(self.unexpected("`}`"));
                    }
                    stmts.push(self.script_stmt()?);
                }
                StatementKind::Script(stmts)
            }
            "in" | "out" | "var" => {
                return Err(self.error_here(
                    "syntax",
                    "pin and variable declarations must precede the action's statements",
                ))
            }
            other => {
                return Err(self.error_here(
                    "unknown-statement",
                    format!("unknown statement keyword `{other}`"),
                ))
            }
        };
        self.eat(&TokenKind::Semi);
        Ok(Statement { kind, span })
    }

    fn command(&mut self) -> PResult<Command> {
        let first = self.ident()?;
        if self.eat(&TokenKind::Assign) {
            let callee = self.ident()?;
            if self.eat(&TokenKind::Dot) {
                let method = self.ident()?;
                if method != "loadAll" {
                    return Err(self.error_here(
                        "unknown-statement",
                        format!("unknown command `{callee}.{method}`"),
                    ));
                }
                self.expect(&TokenKind::LParen)?;
                self.expect(&TokenKind::RParen)?;
                return Ok(Command::LoadAll {
                    assign_to: first,
                    class: callee,
                });
            }
            if callee != "getActualUser" {
                return Err(self.error_here("unknown-statement", format!("unknown command `{callee}`")));
            }
            self.expect(&TokenKind::LParen)?;
            self.expect(&TokenKind::RParen)?;
            return Ok(Command::GetActualUser { assign_to: first });
        }
        self.expect(&TokenKind::LParen)?;
        let cmd = match first.as_str() {
            "assignRole" => {
                let partition = self.ident()?;
                self.expect(&TokenKind::Comma)?;
                let user = self.ident()?;
                Command::AssignRole { partition, user }
            }
            "save" => Command::Save {
                target: self.ident()?,
            },
            "notify" => Command::Notify {
                message: self.string()?,
            },
            other => {
                return Err(self.error_here("unknown-statement", format!("unknown command `{other}`")))
            }
        };
        self.expect(&TokenKind::RParen)?;
        Ok(cmd)
    }

    fn unsupported(&self, what: impl Into<String>) -> Diagnostic {
        self.error_here(
            "unsupported-construct",
            format!("{} is not supported in action scripts", what.into()),
        )
    }

    fn script_stmt(&mut self) -> PResult<ScriptStmt> {
        let span = self.span();
        let first = match &self.peek().kind {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Operator(op) => return Err(self.unsupported(format!("operator `{op}`"))),
            TokenKind::LBrace => return Err(self.unsupported("a nested block")),
            _ => return Err(self.unexpected("script statement")),
        };
        if UNSUPPORTED_KEYWORDS.contains(&first.as_str()) {
            return Err(self.unsupported(format!("`{first}`")));
        }
        self.bump();
        let kind = match &self.peek().kind {
            TokenKind::Assign => {
                self.bump();
                let rhs = self.expr()?;
                ScriptKind::Assign { lhs: first, rhs }
            }
            TokenKind::Dot => {
                self.bump();
                let method = self.ident()?;
                let attr = match accessor_attr(&method, "set") {
                    Some(attr) => attr,
                    None => return Err(self.unsupported(format!("method call `{method}`"))),
                };
                self.expect(&TokenKind::LParen)?;
                let arg = self.expr()?;
                self.expect(&TokenKind::RParen)?;
                ScriptKind::Invoke {
                    receiver: first,
                    attr,
                    arg,
                }
            }
            TokenKind::Ident(_) | TokenKind::Lt => {
                return Err(self.unsupported("a local variable declaration (declare it with `var`)"))
            }
            TokenKind::LParen => return Err(self.unsupported(format!("calling `{first}`"))),
            TokenKind::Operator(op) => {
                let op = op.clone();
                return Err(self.unsupported(format!("operator `{op}`")));
            }
            _ => return Err(self.unexpected("`=` or `.`")),
        };
        match &self.peek().kind {
            TokenKind::Semi => {
                self.bump();
            }
            TokenKind::Operator(op) => {
                let op = op.clone();
                return Err(self.unsupported(format!("arithmetic operator `{op}`")));
            }
            TokenKind::EqEq | TokenKind::NotEq | TokenKind::AndAnd | TokenKind::OrOr => {
                return Err(self.unsupported("a boolean expression"))
            }
            TokenKind::Dot => return Err(self.unsupported("a chained call")),
            _ => return Err(self.unexpected("`;`")),
        }
        Ok(ScriptStmt { kind, span })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let name = match &self.peek().kind {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Str(_) | TokenKind::Int(_) | TokenKind::Decimal(_) => {
                return Err(self.unsupported("a literal value"))
            }
            TokenKind::Operator(op) => {
                let op = op.clone();
                return Err(self.unsupported(format!("operator `{op}`")));
            }
            TokenKind::LParen => return Err(self.unsupported("a parenthesized expression")),
            _ => return Err(self.unexpected("expression")),
        };
        self.bump();
        if name == "new" {
            let class = self.ident()?;
            self.expect(&TokenKind::LParen)?;
            if !self.at(&TokenKind::RParen) {
                return Err(self.unsupported("a constructor with arguments"));
            }
            self.bump();
            return Ok(Expr::New(class));
        }
        if name == "true" || name == "false" || name == "null" {
            return Err(self.unsupported("a literal value"));
        }
        if !self.eat(&TokenKind::Dot) {
            if self.at(&TokenKind::LParen) {
                return Err(self.unsupported(format!("calling `{name}`")));
            }
            return Ok(Expr::Var(name));
        }
        let method = self.ident()?;
        if method == "iterator" {
            self.expect(&TokenKind::LParen)?;
            self.expect(&TokenKind::RParen)?;
            self.expect(&TokenKind::Dot)?;
            let next = self.ident()?;
            if next != "next" {
                return Err(self.unsupported(format!("iterator method `{next}`")));
            }
            self.expect(&TokenKind::LParen)?;
            self.expect(&TokenKind::RParen)?;
            return Ok(Expr::FirstOf(name));
        }
        let Some(attr) = accessor_attr(&method, "get") else {
            return Err(self.unsupported(format!("method call `{method}`")));
        };
        self.expect(&TokenKind::LParen)?;
        if !self.at(&TokenKind::RParen) {
            return Err(self.unsupported("a getter with arguments"));
        }
        self.bump();
        Ok(Expr::Get {
            receiver: name,
            attr,
        })
    }

    fn node_ref(&mut self) -> PResult<NodeRef> {
        let name = self.ident()?;
        Ok(match name.as_str() {
            "initial" => NodeRef::Initial,
            "final" => NodeRef::Final,
            _ => {
                let pin = if self.eat(&TokenKind::Dot) {
                    Some(self.ident()?)
                } else {
                    None
                };
                NodeRef::Action { action: name, pin }
            }
        })
    }

    fn edge(&mut self) -> PResult<EdgeDef> {
        let span = self.span();
        if !matches!(self.peek().kind, TokenKind::Ident(_)) {
            return Err(self.unexpected("`role`, `action`, or an edge"));
        }
        let source = self.node_ref()?;
        if source == NodeRef::Final {
            return Err(Diagnostic::error(
                Location::new(self.file, span.line, span.column),
                "malformed-edge",
                "`final` cannot be the source of an edge",
            ));
        }
        if !self.at(&TokenKind::Arrow) {
            return Err(self.error_here(
                "malformed-edge",
                format!("expected `->` in edge, found {}", self.peek().kind.describe()),
            ));
        }
        self.bump();
        let mut targets = Vec::new();
        loop {
            let guard = if self.eat(&TokenKind::LBracket) {
                let g = self.guard()?;
                self.expect(&TokenKind::RBracket)?;
                Some(g)
            } else {
                None
            };
            let tspan = self.span();
            let node = self.node_ref()?;
            if node == NodeRef::Initial {
                return Err(Diagnostic::error(
                    Location::new(self.file, tspan.line, tspan.column),
                    "malformed-edge",
                    "`initial` cannot be the target of an edge",
                ));
            }
            targets.push(EdgeTarget { node, guard });
            if !self.eat(&TokenKind::Pipe) {
                break;
            }
        }
        if targets.len() == 1 && targets[0].guard.is_some() {
            return Err(Diagnostic::error(
                Location::new(self.file, span.line, span.column),
                "malformed-edge",
                "guards are only allowed on decision alternatives",
            ));
        }
        if !self.at(&TokenKind::Semi) {
            return Err(self.error_here(
                "malformed-edge",
                format!("expected `;` or `|` after edge target, found {}", self.peek().kind.describe()),
            ));
        }
        self.bump();
        Ok(EdgeDef {
            source,
            targets,
            span,
        })
    }

    fn guard(&mut self) -> PResult<Guard> {
        let mut parts = vec![self.guard_and()?];
        while self.eat(&TokenKind::OrOr) {
            parts.push(self.guard_and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Guard::Or(parts)
        })
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut parts = vec![self.guard_atom()?];
        while self.eat(&TokenKind::AndAnd) {
            parts.push(self.guard_atom()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Guard::And(parts)
        })
    }

    fn guard_atom(&mut self) -> PResult<Guard> {
        if self.eat(&TokenKind::Bang) {
            return Ok(Guard::Not(Box::new(self.guard_atom()?)));
        }
        if self.eat(&TokenKind::LParen) {
            let g = self.guard()?;
            self.expect(&TokenKind::RParen)?;
            return Ok(g);
        }
        let left = self.operand()?;
        let op = if self.eat(&TokenKind::EqEq) {
            CompareOp::Eq
        } else if self.eat(&TokenKind::NotEq) {
            CompareOp::Ne
        } else if let Operand::Literal(Literal::Bool(b)) = left {
            return Ok(Guard::Literal(b));
        } else {
            return Err(self.unexpected("`==` or `!=`"));
        };
        let right = self.operand()?;
        Ok(Guard::Compare { left, op, right })
    }

    fn operand(&mut self) -> PResult<Operand> {
        let tok = self.bump();
        Ok(match tok.kind {
            TokenKind::Str(s) => Operand::Literal(Literal::Str(s)),
            TokenKind::Int(i) => Operand::Literal(Literal::Int(i)),
            TokenKind::Decimal(d) => Operand::Literal(Literal::Decimal(d)),
            TokenKind::Operator(op) if op == "-" => match self.bump().kind {
                TokenKind::Int(i) => Operand::Literal(Literal::Int(-i)),
                TokenKind::Decimal(d) => Operand::Literal(Literal::Decimal(-d)),
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("number after `-`"));
                }
            },
            TokenKind::Ident(name) => match name.as_str() {
                "true" => Operand::Literal(Literal::Bool(true)),
                "false" => Operand::Literal(Literal::Bool(false)),
                "null" => Operand::Literal(Literal::Null),
                _ => {
                    if self.eat(&TokenKind::Dot) {
                        let method = self.ident()?;
                        let Some(attr) = accessor_attr(&method, "get") else {
                            return Err(self.error_here(
                                "syntax",
                                format!("guards may only call getters, found `{method}`"),
                            ));
                        };
                        self.expect(&TokenKind::LParen)?;
                        self.expect(&TokenKind::RParen)?;
                        Operand::Get {
                            receiver: name,
                            attr,
                        }
                    } else {
                        Operand::Var(name)
                    }
                }
            },
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("guard operand"));
            }
        })
    }

    // -- pages ---------------------------------------------------------------

    fn page(&mut self) -> PResult<PageModel> {
        self.expect_keyword("page")?;
        let name = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let params = if self.at(&TokenKind::RParen) {
            Vec::new()
        } else {
            self.typed_list()?
        };
        self.expect(&TokenKind::RParen)?;
        self.expect(&TokenKind::LBrace)?;
        let mut elements = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            elements.push(self.element()?);
        }
        self.expect_eof()?;
        Ok(PageModel {
            name,
            params,
            elements,
            file: self.file.to_string(),
        })
    }

    fn element(&mut self) -> PResult<PageElement> {
        let span = self.span();
        let keyword = self.ident()?;
        let kind = match keyword.as_str() {
            "heading" => {
                let level = match self.peek().kind {
                    TokenKind::Int(l @ 1..=3) => l as u8,
                    _ => return Err(self.unexpected("heading level 1, 2, or 3")),
                };
                self.bump();
                let text = self.string()?;
                ElementKind::Heading { level, text }
            }
            "text" => ElementKind::Text(self.string()?),
            "output" => {
                let param = self.ident()?;
                let attr = if self.eat(&TokenKind::Dot) {
                    Some(self.ident()?)
                } else {
                    None
                };
                ElementKind::Output { param, attr }
            }
            "input" => {
                let param = self.ident()?;
                self.expect(&TokenKind::Dot)?;
                let attr = self.ident()?;
                ElementKind::Input { param, attr }
            }
            "table" => {
                let param = self.ident()?;
                let selectable = self.eat_keyword("selectable");
                self.expect(&TokenKind::LParen)?;
                let columns = self.ident_list(&TokenKind::RParen)?;
                self.expect(&TokenKind::RParen)?;
                ElementKind::Table {
                    param,
                    selectable,
                    columns,
                }
            }
            other => {
                return Err(Diagnostic::error(
                    Location::new(self.file, span.line, span.column),
                    "syntax",
                    format!("unknown page element `{other}`"),
                ))
            }
        };
        self.expect(&TokenKind::Semi)?;
        Ok(PageElement { kind, span })
    }

    // -- application ---------------------------------------------------------

    fn app(&mut self) -> PResult<(AppModel, HashMap<String, Span>)> {
        self.expect_keyword("app")?;
        let name = self.ident()?;
        self.expect(&TokenKind::LBrace)?;
        let mut roles = Vec::new();
        let mut role_spans = HashMap::new();
        let mut menu = Vec::new();
        let mut rights = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let span = self.span();
            if self.eat_keyword("roles") {
                loop {
                    let s = self.span();
                    let role = self.ident()?;
                    role_spans.entry(role.clone()).or_insert(s);
                    roles.push(role);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                self.expect(&TokenKind::Semi)?;
            } else if self.eat_keyword("menu") {
                menu.extend(self.entry_block()?);
            } else if self.eat_keyword("rights") {
                let role = self.ident()?;
                let allowed = self.entry_block()?;
                rights.push(RightRule {
                    role,
                    allowed,
                    span,
                });
            } else {
                return Err(self.unexpected("`roles`, `menu`, or `rights`"));
            }
        }
        self.expect_eof()?;
        Ok((
            AppModel {
                name,
                roles,
                menu,
                rights,
                file: self.file.to_string(),
            },
            role_spans,
        ))
    }

    fn entry_block(&mut self) -> PResult<Vec<MenuEntry>> {
        self.expect(&TokenKind::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let span = self.span();
            let kind = self.ident()?;
            let name = self.ident()?;
            let target = match kind.as_str() {
                "page" => EntryRef::Page(name),
                "activity" => EntryRef::Activity(name),
                "list" => EntryRef::Class {
                    class: name,
                    mode: ClassPageMode::List,
                },
                "create" => EntryRef::Class {
                    class: name,
                    mode: ClassPageMode::Create,
                },
                other => {
                    return Err(Diagnostic::error(
                        Location::new(self.file, span.line, span.column),
                        "syntax",
                        format!("unknown menu entry kind `{other}`"),
                    ))
                }
            };
            self.expect(&TokenKind::Semi)?;
            out.push(MenuEntry { target, span });
        }
        Ok(out)
    }
}

/// `setPrimaryRef` with prefix `set` yields `primaryRef`.
pub(crate) fn accessor_attr(method: &str, prefix: &str) -> Option<String> {
    let rest = method.strip_prefix(prefix)?;
    let mut chars = rest.chars();
    let first = chars.next()?;
    if !first.is_uppercase() {
        return None;
    }
    Some(first.to_lowercase().chain(chars).collect())
}

/// Inverse of [`accessor_attr`].
pub(crate) fn accessor_name(prefix: &str, attr: &str) -> String {
    let mut chars = attr.chars();
    match chars.next() {
        Some(first) => format!("{prefix}{}{}", first.to_uppercase(), chars.as_str()),
        None => prefix.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Single-file structural checks

fn at(file: &str, span: Span) -> Location {
    Location::new(file, span.line, span.column)
}

fn check_class_model(file: &str, model: &ClassModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    for class in &model.classes {
        if !seen.insert(class.name.as_str()) {
            diags.push(Diagnostic::error(
                at(file, class.span),
                "duplicate-class",
                format!("class `{}` is declared more than once", class.name),
            ));
        }
        let mut members = HashSet::new();
        let names = class
            .attributes
            .iter()
            .map(|a| (a.name.as_str(), a.span))
            .chain(class.associations.iter().map(|a| (a.role.as_str(), a.span)));
        for (name, span) in names {
            if !members.insert(name) {
                diags.push(Diagnostic::error(
                    at(file, span),
                    "duplicate-name",
                    format!("`{}` declares `{name}` more than once", class.name),
                ));
            }
        }
    }
    diags
}

fn check_activity(file: &str, model: &ActivityModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut actions: HashMap<&str, &ActionDef> = HashMap::new();
    for action in &model.actions {
        if actions.insert(action.name.as_str(), action).is_some() {
            diags.push(Diagnostic::error(
                at(file, action.span),
                "duplicate-action",
                format!("action `{}` is declared more than once", action.name),
            ));
        }
    }

    let mut partitions = HashSet::new();
    let mut membership: HashMap<&str, &str> = HashMap::new();
    for part in &model.partitions {
        if !partitions.insert(part.name.as_str()) {
            diags.push(Diagnostic::error(
                at(file, part.span),
                "duplicate-partition",
                format!("partition `{}` is declared more than once", part.name),
            ));
        }
        for name in &part.actions {
            if !actions.contains_key(name.as_str()) {
                diags.push(Diagnostic::error(
                    at(file, part.span),
                    "unknown-action",
                    format!("partition `{}` lists undeclared action `{name}`", part.name),
                ));
            } else if let Some(prev) = membership.insert(name, &part.name) {
                diags.push(Diagnostic::error(
                    at(file, part.span),
                    "duplicate-membership",
                    format!("action `{name}` belongs to both `{prev}` and `{}`", part.name),
                ));
            }
        }
    }

    for action in &model.actions {
        check_action_scope(file, action, &mut diags);
    }

    let initial_edges: Vec<_> = model
        .edges
        .iter()
        .filter(|e| e.source == NodeRef::Initial)
        .collect();
    if initial_edges.len() != 1 {
        let loc = initial_edges
            .get(1)
            .map(|e| at(file, e.span))
            .unwrap_or_else(|| Location::new(file, 1, 1));
        diags.push(Diagnostic::error(
            loc,
            "initial-edge",
            format!(
                "activity `{}` must have exactly one edge from `initial`, found {}",
                model.name,
                initial_edges.len()
            ),
        ));
    }

    let mut sources: HashSet<&str> = HashSet::new();
    for edge in &model.edges {
        let nodes = std::iter::once(&edge.source).chain(edge.targets.iter().map(|t| &t.node));
        for node in nodes {
            if let Some(name) = node.action() {
                if !actions.contains_key(name) {
                    diags.push(Diagnostic::error(
                        at(file, edge.span),
                        "malformed-edge",
                        format!("edge references undeclared action `{name}`"),
                    ));
                }
            }
        }
        if let Some(src) = edge.source.action() {
            if !sources.insert(src) {
                diags.push(Diagnostic::error(
                    at(file, edge.span),
                    "implicit-fork",
                    format!("action `{src}` has more than one outgoing edge; use `|` for a decision"),
                ));
            }
            if let Some(source_action) = actions.get(src) {
                for target in &edge.targets {
                    if let Some(guard) = &target.guard {
                        check_guard_scope(file, edge.span, source_action, guard, &mut diags);
                    }
                }
            }
        }
        if edge.source == NodeRef::Initial && edge.targets.iter().any(|t| t.guard.is_some()) {
            diags.push(Diagnostic::error(
                at(file, edge.span),
                "malformed-edge",
                "edges from `initial` cannot carry guards",
            ));
        }
    }
    diags
}

fn check_action_scope(file: &str, action: &ActionDef, diags: &mut Vec<Diagnostic>) {
    let mut names = HashSet::new();
    for decl in action.in_pins.iter().chain(&action.out_pins).chain(&action.vars) {
        if !names.insert(decl.name.as_str()) {
            diags.push(Diagnostic::error(
                at(file, decl.span),
                "duplicate-name",
                format!("`{}` is declared more than once in action `{}`", decl.name, action.name),
            ));
        }
    }
    let mut views = 0;
    let need = |name: &str, span: Span, diags: &mut Vec<Diagnostic>| {
        if !names.contains(name) {
            diags.push(Diagnostic::error(
                at(file, span),
                "unknown-name",
                format!("`{name}` is not declared in action `{}`", action.name),
            ));
        }
    };
    for stmt in &action.body {
        match &stmt.kind {
            StatementKind::View { args, .. } => {
                views += 1;
                if views == 2 {
                    diags.push(Diagnostic::error(
                        at(file, stmt.span),
                        "multiple-views",
                        format!("action `{}` contains more than one `view`", action.name),
                    ));
                }
                for arg in args {
                    need(arg, stmt.span, diags);
                }
            }
            StatementKind::Cmd(cmd) => match cmd {
                Command::LoadAll { assign_to, .. } | Command::GetActualUser { assign_to } => {
                    need(assign_to, stmt.span, diags)
                }
                Command::AssignRole { user, .. } => need(user, stmt.span, diags),
                Command::Save { target } => need(target, stmt.span, diags),
                Command::Notify { .. } => {}
            },
            StatementKind::Script(stmts) => {
                for s in stmts {
                    let span = if s.span.line == 0 { stmt.span } else { s.span };
                    match &s.kind {
                        ScriptKind::Assign { lhs, rhs } => {
                            need(lhs, span, diags);
                            if let Some(n) = expr_name(rhs) {
                                need(n, span, diags);
                            }
                        }
                        ScriptKind::Invoke { receiver, arg, .. } => {
                            need(receiver, span, diags);
                            if let Some(n) = expr_name(arg) {
                                need(n, span, diags);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn expr_name(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Var(n) | Expr::FirstOf(n) | Expr::Get { receiver: n, .. } => Some(n),
        Expr::New(_) => None,
    }
}

fn check_guard_scope(file: &str, span: Span, action: &ActionDef, guard: &Guard, diags: &mut Vec<Diagnostic>) {
    let check_operand = |op: &Operand, diags: &mut Vec<Diagnostic>| {
        let name = match op {
            Operand::Var(n) | Operand::Get { receiver: n, .. } => n,
            Operand::Literal(_) => return,
        };
        if action.declared(name).is_none() {
            diags.push(Diagnostic::error(
                at(file, span),
                "unknown-name",
                format!("guard refers to `{name}`, which action `{}` does not declare", action.name),
            ));
        }
    };
    fn walk(g: &Guard, f: &mut dyn FnMut(&Operand)) {
        match g {
            Guard::Literal(_) => {}
            Guard::Compare { left, right, .. } => {
                f(left);
                f(right);
            }
            Guard::Not(inner) => walk(inner, f),
            Guard::And(parts) | Guard::Or(parts) => parts.iter().for_each(|p| walk(p, f)),
        }
    }
    walk(guard, &mut |op| check_operand(op, diags));
}

fn check_page(file: &str, model: &PageModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut names = HashSet::new();
    for p in &model.params {
        if !names.insert(p.name.as_str()) {
            diags.push(Diagnostic::error(
                at(file, p.span),
                "duplicate-name",
                format!("page `{}` declares parameter `{}` twice", model.name, p.name),
            ));
        }
    }
    diags
}

fn check_app(file: &str, model: &AppModel, role_spans: &HashMap<String, Span>) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut roles = HashSet::new();
    for role in &model.roles {
        if !roles.insert(role.as_str()) {
            diags.push(Diagnostic::error(
                at(file, role_spans.get(role).copied().unwrap_or_default()),
                "duplicate-role",
                format!("role `{role}` is declared more than once"),
            ));
        }
    }
    for rule in &model.rights {
        if !roles.contains(rule.role.as_str()) {
            diags.push(Diagnostic::error(
                at(file, rule.span),
                "unknown-role",
                format!("rights declared for undeclared role `{}`", rule.role),
            ));
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accessor_names_round_trip() {
        assert_eq!(accessor_attr("setPrimaryRef", "set").as_deref(), Some("primaryRef"));
        assert_eq!(accessor_attr("getGrade1", "get").as_deref(), Some("grade1"));
        assert_eq!(accessor_attr("settle", "set"), None);
        assert_eq!(accessor_attr("set", "set"), None);
        assert_eq!(accessor_name("set", "primaryRef"), "setPrimaryRef");
    }

    #[test]
    fn script_assign_first_of() {
        let stmts = parse_script_block("t", "selectedUser = allStaff.iterator().next();").unwrap();
        assert_eq!(
            stmts,
            vec![ScriptStmt::assign("selectedUser", Expr::FirstOf("allStaff".into()))]
        );
    }

    #[test]
    fn script_new_object() {
        let stmts = parse_script_block("t", "o = new ThesisData();").unwrap();
        assert_eq!(stmts, vec![ScriptStmt::assign("o", Expr::New("ThesisData".into()))]);
    }

    #[test]
    fn script_setter_and_getter() {
        let stmts =
            parse_script_block("t", "o.setPrimaryRef(actualUser); x = o.getSecondaryRef();").unwrap();
        assert_eq!(
            stmts,
            vec![
                ScriptStmt::invoke("o", "primaryRef", Expr::Var("actualUser".into())),
                ScriptStmt::assign(
                    "x",
                    Expr::Get {
                        receiver: "o".into(),
                        attr: "secondaryRef".into()
                    }
                ),
            ]
        );
    }

    #[test]
    fn script_rejects_loops_and_arithmetic() {
        for src in ["while(true){}", "for (;;) {}", "x = a + b;", "x = 5;", "x++;", "foo();", "Staff s = t;"] {
            let diags = parse_script_block("t", src).unwrap_err();
            assert_eq!(diags.len(), 1, "{src}");
            assert_eq!(diags[0].code, "unsupported-construct", "{src}: {}", diags[0]);
        }
    }

    #[test]
    fn script_error_names_construct() {
        let d = &parse_script_block("t", "while(true){}").unwrap_err()[0];
        assert!(d.message.contains("while"), "{}", d.message);
        assert_eq!((d.location.line, d.location.column), (1, 1));
    }

    #[test]
    fn empty_class_model() {
        let m = parse_class_model("e.cd", "classdiagram Empty { }").unwrap();
        assert!(m.classes.is_empty());
    }

    #[test]
    fn duplicate_class_is_reported() {
        let d = parse_class_model("d.cd", "classdiagram D { class A {} class A {} }").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "duplicate-class");
        // the second `class` keyword starts after "classdiagram D { class A {} "
        assert_eq!(d[0].location.column, "classdiagram D { class A {} ".len() as u32 + 1);
    }

    #[test]
    fn unknown_attribute_type() {
        let d = parse_class_model("d.cd", "classdiagram D { class A { x: Float; } }").unwrap_err();
        assert_eq!(d[0].code, "syntax");
    }

    #[test]
    fn minimal_activity() {
        let a = parse_activity("a.act", "activity A { action X {} initial -> X; X -> final; }").unwrap();
        assert_eq!(a.actions.len(), 1);
        assert_eq!(a.edges.len(), 2);
        assert_eq!(a.edges[1].targets[0].node, NodeRef::Final);
    }

    #[test]
    fn pin_edge() {
        let src = "activity A {
            action AssignRef2 { out : ThesisData o; }
            action SetGrade1 { in : ThesisData i; }
            initial -> AssignRef2;
            AssignRef2.o -> SetGrade1.i;
            SetGrade1 -> final;
        }";
        let a = parse_activity("a.act", src).unwrap();
        let e = &a.edges[1];
        assert_eq!(
            e.source,
            NodeRef::Action {
                action: "AssignRef2".into(),
                pin: Some("o".into())
            }
        );
        assert_eq!(e.targets.len(), 1);
        assert_eq!(
            e.targets[0],
            EdgeTarget {
                node: NodeRef::Action {
                    action: "SetGrade1".into(),
                    pin: Some("i".into())
                },
                guard: None
            }
        );
    }

    #[test]
    fn guarded_decision() {
        let src = "activity A {
            action B { out : T o; }
            action C { in : T i; }
            action D { in : T i; }
            initial -> B;
            B.o -> [o.getGrade1() == o.getGrade2() && !(o != null)] C.i | D.i;
            C -> final; D -> final;
        }";
        let a = parse_activity("a.act", src).unwrap();
        let e = &a.edges[1];
        assert!(e.is_decision());
        assert!(matches!(e.targets[0].guard, Some(Guard::And(ref parts)) if parts.len() == 2));
        assert!(e.targets[1].guard.is_none());
    }

    #[test]
    fn activity_structural_errors() {
        let cases = [
            ("activity A { action X {} action X {} initial -> X; }", "duplicate-action"),
            ("activity A { action X {} X -> final; }", "initial-edge"),
            ("activity A { action X {} initial -> X; initial -> X; }", "initial-edge"),
            ("activity A { role R { Y } action X {} initial -> X; }", "unknown-action"),
            ("activity A { action X {} initial -> Y; }", "malformed-edge"),
            ("activity A { action X {} initial -> X; X -> [true] final; }", "malformed-edge"),
            ("activity A { action X {} final -> X; }", "malformed-edge"),
            ("activity A { action X {} initial -> X; X final; }", "malformed-edge"),
            ("activity A { action X { view : P(a); } initial -> X; }", "unknown-name"),
            ("activity A { action X { var : T a; view : P(a); view : P(a); } initial -> X; }", "multiple-views"),
            ("activity A { action X { var : T a, T a; } initial -> X; }", "duplicate-name"),
            ("activity A { action X { bogus : x; } initial -> X; }", "unknown-statement"),
            ("activity A { action X {} action Y {} initial -> X; X -> Y; X -> final; }", "implicit-fork"),
            ("activity A { role R { X } role R { } action X {} initial -> X; }", "duplicate-partition"),
            ("activity A { role R { X } role S { X } action X {} initial -> X; }", "duplicate-membership"),
        ];
        for (src, code) in cases {
            let diags = parse_activity("a.act", src).unwrap_err();
            assert!(diags.iter().any(|d| d.code == code), "{src}: {diags:?}");
        }
    }

    #[test]
    fn missing_semicolon_after_cmd_is_accepted() {
        let src = "activity A { role R1 { X } role Referee2 {}
            action X { var : Staff s; cmd : s = getActualUser(); cmd : assignRole(Referee2, s) }
            initial -> X; X -> final; }";
        let a = parse_activity("a.act", src).unwrap();
        assert_eq!(a.actions[0].body.len(), 2);
    }

    #[test]
    fn page_with_selectable_table() {
        let src = "page SelectSecondaryRef(Set<Staff> staff) {
            heading 1 \"Select\";
            table staff selectable (name, email);
        }";
        let p = parse_page("p.page", src).unwrap();
        assert_eq!(p.params.len(), 1);
        assert_eq!(p.params[0].ty, TypeRef::SetOf("Staff".into()));
        assert_eq!(p.elements.len(), 2);
        assert!(matches!(p.elements[1].kind, ElementKind::Table { selectable: true, .. }));
    }

    #[test]
    fn page_without_params() {
        let p = parse_page("p.page", "page Welcome() { heading 2 \"Hi\"; }").unwrap();
        assert!(p.params.is_empty());
        assert_eq!(p.elements.len(), 1);
    }

    #[test]
    fn page_input_on_undeclared_param_parses() {
        assert!(parse_page("p.page", "page P() { input nope.grade; }").is_ok());
    }

    #[test]
    fn heading_level_out_of_range() {
        let d = parse_page("p.page", "page P() { heading 4 \"x\"; }").unwrap_err();
        assert_eq!(d[0].code, "syntax");
    }

    #[test]
    fn app_models() {
        let src = "app Theses {
            roles guest, lecturer;
            menu { activity GradeThesis; list Staff; }
            rights lecturer { activity GradeThesis; }
        }";
        let a = parse_app("a.app", src).unwrap();
        assert_eq!(a.roles, vec!["guest", "lecturer"]);
        assert_eq!(a.menu.len(), 2);
        assert_eq!(
            a.menu[1].target,
            EntryRef::Class {
                class: "Staff".into(),
                mode: ClassPageMode::List
            }
        );
        assert!(parse_app("a.app", "app E { menu { } }").unwrap().menu.is_empty());
    }

    #[test]
    fn app_rights_for_undeclared_role() {
        let d = parse_app("a.app", "app E { roles a; rights b { list X; } }").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "unknown-role");
        assert_eq!(d[0].location.line, 1);
    }

    #[test]
    fn every_error_has_location_inside_source() {
        let srcs = ["activity A { action X { cmd : x = y.z(); } }", "activity", "activity A {", "activity A { action X { java : { x = ; } } }"];
        for src in srcs {
            let diags = parse_activity("a.act", src).unwrap_err();
            let lines = src.lines().count().max(1) as u32;
            for d in diags {
                assert!(d.location.line >= 1 && d.location.line <= lines, "{d}");
                assert!(d.location.column >= 1, "{d}");
            }
        }
    }
}
