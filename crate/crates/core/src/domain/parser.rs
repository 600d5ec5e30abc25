use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use super::{
    ActionSchema, AtomTemplate, Domain, PredicateSchema, Requirement, Term, TypeDecl, TypedParam, ROOT_KINDS, TOP_KIND,
};

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported requirement `{0}`")]
    UnsupportedRequirement(String),
    #[error("unsupported construct `{0}`")]
    Unsupported(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared parameter `?{0}`")]
    UndeclaredVariable(String),
    #[error("undeclared constant `{0}`")]
    UndeclaredConstant(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("predicate `{name}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("`{term}` of type `{found}` does not fit parameter of type `{expected}`")]
    TypeMismatch {
        term: String,
        expected: String,
        found: String,
    },
    #[error("atom `{0}` is both added and deleted")]
    ContradictoryEffect(String),
    #[error("type hierarchy contains a cycle through `{0}`")]
    TypeCycle(String),
}

/// A parse or validation failure, located in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct DomainError {
    pub pos: Pos,
    pub kind: DomainErrorKind,
}

fn fail<T>(pos: Pos, kind: DomainErrorKind) -> Result<T, DomainError> {
    Err(DomainError { pos, kind })
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T, DomainError> {
    fail(pos, DomainErrorKind::Syntax(msg.into()))
}

#[derive(Debug, Clone)]
enum SExpr {
    Sym(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    fn pos(&self) -> Pos {
        match self {
            SExpr::Sym(_, p) | SExpr::List(_, p) => *p,
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            SExpr::Sym(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    fn list(&self) -> Result<&[SExpr], DomainError> {
        match self {
            SExpr::List(items, _) => Ok(items),
            SExpr::Sym(s, p) => syntax(*p, format!("expected a list, found `{s}`")),
        }
    }

    fn expect_sym(&self) -> Result<&str, DomainError> {
        match self {
            SExpr::Sym(s, _) => Ok(s),
            SExpr::List(_, p) => syntax(*p, "expected a symbol, found a list"),
        }
    }
}

fn read_sexprs(text: &str) -> Result<Vec<SExpr>, DomainError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = vec![(Vec::new(), Pos::default())];
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let mut token: Option<(String, Pos)> = None;

    fn flush(token: &mut Option<(String, Pos)>, stack: &mut [(Vec<SExpr>, Pos)]) {
        if let Some((s, p)) = token.take() {
            stack.last_mut().expect("stack never empty").0.push(SExpr::Sym(s, p));
        }
    }

    while let Some(c) = chars.next() {
        let here = Pos { line, column };
        match c {
            ';' => {
                flush(&mut token, &mut stack);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '(' => {
                flush(&mut token, &mut stack);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut token, &mut stack);
                if stack.len() == 1 {
                    return syntax(here, "unbalanced `)`");
                }
                let (items, open) = stack.pop().expect("checked length");
                stack
                    .last_mut()
                    .expect("stack never empty")
                    .0
                    .push(SExpr::List(items, open));
            }
            c if c.is_whitespace() => flush(&mut token, &mut stack),
            c => match &mut token {
                Some((s, _)) => s.push(c),
                None => token = Some((c.to_string(), here)),
            },
        }
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    flush(&mut token, &mut stack);
    if stack.len() > 1 {
        let (_, open) = stack.pop().expect("checked length");
        return syntax(open, "unclosed `(`");
    }
    Ok(stack.pop().expect("stack never empty").0)
}

/// Splits `a b - t1 c - t2 d` into typed parameters. Untyped trailing names
/// default to `object`, following PDDL convention.
fn typed_list(items: &[SExpr], want_vars: bool, typing: bool) -> Result<Vec<(String, String, Pos)>, DomainError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = items[i].expect_sym()?;
        let pos = items[i].pos();
        if s == "-" {
            if !typing {
                return fail(
                    pos,
                    DomainErrorKind::UnsupportedRequirement(":typing (not declared)".into()),
                );
            }
            let kind = items
                .get(i + 1)
                .ok_or(DomainError {
                    pos,
                    kind: DomainErrorKind::Syntax("missing type after `-`".into()),
                })?
                .expect_sym()?;
            if kind.starts_with('(') || kind == "either" {
                return fail(pos, DomainErrorKind::Unsupported("either".into()));
            }
            if pending.is_empty() {
                return syntax(pos, "`-` with no names before it");
            }
            out.extend(pending.drain(..).map(|(n, p)| (n, kind.to_string(), p)));
            i += 2;
            continue;
        }
        let name = if want_vars {
            match s.strip_prefix('?') {
                Some(v) if !v.is_empty() => v.to_string(),
                _ => return syntax(pos, format!("expected a parameter `?name`, found `{s}`")),
            }
        } else {
            if s.starts_with('?') {
                return syntax(pos, format!("unexpected parameter `{s}`"));
            }
            s.to_string()
        };
        pending.push((name, pos));
        i += 1;
    }
    out.extend(pending.into_iter().map(|(n, p)| (n, "object".to_string(), p)));
    Ok(out)
}

struct Builder {
    domain: Domain,
    type_pos: HashMap<String, Pos>,
}

impl Builder {
    fn typing(&self) -> bool {
        self.domain.requirements.contains(&Requirement::Typing)
    }

    fn check_kind(&self, kind: &str, pos: Pos) -> Result<(), DomainError> {
        if self.domain.has_kind(kind) {
            Ok(())
        } else {
            fail(pos, DomainErrorKind::UndeclaredType(kind.to_string()))
        }
    }

    fn requirements(&mut self, items: &[SExpr]) -> Result<(), DomainError> {
        for item in items {
            let kw = item.expect_sym()?;
            let req = Requirement::from_keyword(kw).ok_or(DomainError {
                pos: item.pos(),
                kind: DomainErrorKind::UnsupportedRequirement(kw.to_string()),
            })?;
            if !self.domain.requirements.contains(&req) {
                self.domain.requirements.push(req);
            }
        }
        Ok(())
    }

    fn types(&mut self, items: &[SExpr]) -> Result<(), DomainError> {
        if !self.typing() {
            return fail(
                items.first().map(SExpr::pos).unwrap_or_default(),
                DomainErrorKind::UnsupportedRequirement(":types without :typing".into()),
            );
        }
        let mut decls = Vec::new();
        // a bare name in `(:types ...)` is either a root kind or a subtype of `object`
        let mut pending: Vec<(String, Pos)> = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let s = items[i].expect_sym()?;
            let pos = items[i].pos();
            if s == "-" {
                let parent = items
                    .get(i + 1)
                    .ok_or(DomainError {
                        pos,
                        kind: DomainErrorKind::Syntax("missing type after `-`".into()),
                    })?
                    .expect_sym()?;
                for (name, p) in pending.drain(..) {
                    decls.push((name, Some(parent.to_string()), p, items[i + 1].pos()));
                }
                i += 2;
                continue;
            }
            pending.push((s.to_string(), pos));
            i += 1;
        }
        for (name, p) in pending {
            decls.push((name, None, p, p));
        }
        for (name, parent, pos, parent_pos) in decls {
            if name == TOP_KIND || self.type_pos.contains_key(&name) {
                return fail(pos, DomainErrorKind::DuplicateName(name));
            }
            let parent = match parent {
                Some(p) if ROOT_KINDS.contains(&name.as_str()) => {
                    return syntax(parent_pos, format!("root kind `{name}` cannot have parent `{p}`"))
                }
                None if ROOT_KINDS.contains(&name.as_str()) => None,
                None => Some("object".to_string()),
                Some(p) => Some(p),
            };
            self.type_pos.insert(name.clone(), pos);
            self.domain.types.push(TypeDecl { name, parent });
        }
        // parents may be declared later in the list, so resolve afterwards
        for t in &self.domain.types {
            if let Some(p) = &t.parent {
                if !self.domain.has_kind(p) {
                    return fail(self.type_pos[&t.name], DomainErrorKind::UndeclaredType(p.clone()));
                }
            }
        }
        for t in &self.domain.types {
            let mut seen = BTreeSet::new();
            let mut cur = t.name.as_str();
            while let Some(p) = self.domain.parent_of(cur) {
                if !seen.insert(cur) {
                    return fail(self.type_pos[&t.name], DomainErrorKind::TypeCycle(t.name.clone()));
                }
                cur = p;
            }
        }
        Ok(())
    }

    fn constants(&mut self, items: &[SExpr]) -> Result<(), DomainError> {
        let typing = self.typing();
        for (name, kind, pos) in typed_list(items, false, typing)? {
            self.check_kind(&kind, pos)?;
            if self.domain.constants.iter().any(|c| c.name == name) {
                return fail(pos, DomainErrorKind::DuplicateName(name));
            }
            self.domain.constants.push(TypedParam { name, kind });
        }
        Ok(())
    }

    fn predicates(&mut self, items: &[SExpr]) -> Result<(), DomainError> {
        let typing = self.typing();
        for item in items {
            let parts = item.list()?;
            let head = parts
                .first()
                .ok_or(DomainError {
                    pos: item.pos(),
                    kind: DomainErrorKind::Syntax("empty predicate declaration".into()),
                })?
                .expect_sym()?;
            if self.domain.predicate(head).is_some() {
                return fail(item.pos(), DomainErrorKind::DuplicateName(head.to_string()));
            }
            let params = self.params(&parts[1..], typing)?;
            self.domain.predicates.push(PredicateSchema {
                name: head.to_string(),
                params,
            });
        }
        Ok(())
    }

    fn params(&self, items: &[SExpr], typing: bool) -> Result<Vec<TypedParam>, DomainError> {
        let mut params: Vec<TypedParam> = Vec::new();
        for (name, kind, pos) in typed_list(items, true, typing)? {
            self.check_kind(&kind, pos)?;
            if params.iter().any(|p| p.name == name) {
                return fail(pos, DomainErrorKind::DuplicateName(format!("?{name}")));
            }
            params.push(TypedParam { name, kind });
        }
        Ok(params)
    }

    fn template(&self, expr: &SExpr, params: &[TypedParam]) -> Result<AtomTemplate, DomainError> {
        let parts = expr.list()?;
        let head = parts
            .first()
            .ok_or(DomainError {
                pos: expr.pos(),
                kind: DomainErrorKind::Syntax("empty atom".into()),
            })?
            .expect_sym()?;
        let schema = self.domain.predicate(head).ok_or(DomainError {
            pos: expr.pos(),
            kind: DomainErrorKind::UndeclaredPredicate(head.to_string()),
        })?;
        let args = &parts[1..];
        if args.len() != schema.arity() {
            return fail(
                expr.pos(),
                DomainErrorKind::ArityMismatch {
                    name: head.to_string(),
                    expected: schema.arity(),
                    found: args.len(),
                },
            );
        }
        let mut terms = Vec::with_capacity(args.len());
        for (arg, slot) in args.iter().zip(&schema.params) {
            let s = arg.expect_sym()?;
            let (term, kind) = if let Some(v) = s.strip_prefix('?') {
                let p = params.iter().find(|p| p.name == v).ok_or(DomainError {
                    pos: arg.pos(),
                    kind: DomainErrorKind::UndeclaredVariable(v.to_string()),
                })?;
                (Term::Var(v.to_string()), p.kind.clone())
            } else {
                let c = self.domain.constants.iter().find(|c| c.name == s).ok_or(DomainError {
                    pos: arg.pos(),
                    kind: DomainErrorKind::UndeclaredConstant(s.to_string()),
                })?;
                (Term::Const(s.to_string()), c.kind.clone())
            };
            if !self.domain.is_subkind(&kind, &slot.kind) {
                return fail(
                    arg.pos(),
                    DomainErrorKind::TypeMismatch {
                        term: s.to_string(),
                        expected: slot.kind.clone(),
                        found: kind,
                    },
                );
            }
            terms.push(term);
        }
        Ok(AtomTemplate {
            predicate: head.to_string(),
            terms,
        })
    }

    /// Reads `(and l1 l2 ...)`, a single literal, or `()` into (positive, negative).
    fn literals(
        &self,
        expr: &SExpr,
        params: &[TypedParam],
        negative_allowed: bool,
    ) -> Result<(Vec<AtomTemplate>, Vec<AtomTemplate>), DomainError> {
        let parts = expr.list()?;
        let conjuncts: Vec<&SExpr> = match parts.first().and_then(SExpr::sym) {
            None if parts.is_empty() => Vec::new(),
            Some("and") => parts[1..].iter().collect(),
            _ => vec![expr],
        };
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for c in conjuncts {
            let cparts = c.list()?;
            match cparts.first().and_then(SExpr::sym) {
                Some("not") => {
                    if cparts.len() != 2 {
                        return syntax(c.pos(), "`not` takes exactly one atom");
                    }
                    if !negative_allowed {
                        return fail(
                            c.pos(),
                            DomainErrorKind::UnsupportedRequirement(":negative-preconditions (not declared)".into()),
                        );
                    }
                    neg.push(self.template(&cparts[1], params)?);
                }
                Some(kw @ ("or" | "imply" | "forall" | "exists" | "when" | "=" | "increase")) => {
                    return fail(c.pos(), DomainErrorKind::Unsupported(kw.to_string()));
                }
                _ => pos.push(self.template(c, params)?),
            }
        }
        Ok((pos, neg))
    }

    fn action(&self, items: &[SExpr], pos: Pos) -> Result<ActionSchema, DomainError> {
        let name = items
            .first()
            .ok_or(DomainError {
                pos,
                kind: DomainErrorKind::Syntax("action without a name".into()),
            })?
            .expect_sym()?
            .to_string();
        let mut params = Vec::new();
        let mut pre = (Vec::new(), Vec::new());
        let mut eff = (Vec::new(), Vec::new());
        let mut i = 1;
        let neg_ok = self.domain.requirements.contains(&Requirement::NegativePreconditions);
        while i < items.len() {
            let key = items[i].expect_sym()?;
            let value = items.get(i + 1).ok_or(DomainError {
                pos: items[i].pos(),
                kind: DomainErrorKind::Syntax(format!("`{key}` without a value")),
            })?;
            match key {
                ":parameters" => params = self.params(value.list()?, self.typing())?,
                ":precondition" => pre = self.literals(value, &params, neg_ok)?,
                ":effect" => eff = self.literals(value, &params, true)?,
                other => return fail(items[i].pos(), DomainErrorKind::Unsupported(other.to_string())),
            }
            i += 2;
        }
        let (mut add, mut del) = eff;
        dedup(&mut add);
        dedup(&mut del);
        if let Some(both) = add.iter().find(|a| del.contains(a)) {
            return fail(pos, DomainErrorKind::ContradictoryEffect(both.predicate.clone()));
        }
        let (mut pre_pos, mut pre_neg) = pre;
        dedup(&mut pre_pos);
        dedup(&mut pre_neg);
        Ok(ActionSchema {
            name,
            params,
            pre_pos,
            pre_neg,
            add,
            del,
        })
    }
}

fn dedup(v: &mut Vec<AtomTemplate>) {
    let mut seen = BTreeSet::new();
    v.retain(|t| seen.insert(t.clone()));
}

/// Parses a domain file in the supported PDDL subset.
pub fn parse_domain(text: &str) -> Result<Domain, DomainError> {
    let top = read_sexprs(text)?;
    let root = match top.as_slice() {
        [single] => single,
        [] => return syntax(Pos { line: 1, column: 1 }, "empty domain file"),
        [_, extra, ..] => return syntax(extra.pos(), "unexpected content after domain"),
    };
    let items = root.list()?;
    if items.first().and_then(SExpr::sym) != Some("define") {
        return syntax(root.pos(), "expected `(define (domain NAME) ...)`");
    }
    let header = items.get(1).ok_or(DomainError {
        pos: root.pos(),
        kind: DomainErrorKind::Syntax("missing `(domain NAME)`".into()),
    })?;
    let name = match header.list()? {
        [kw, name] if kw.sym() == Some("domain") => name.expect_sym()?.to_string(),
        _ => return syntax(header.pos(), "expected `(domain NAME)`"),
    };
    let mut b = Builder {
        domain: Domain {
            name,
            requirements: Vec::new(),
            types: Vec::new(),
            constants: Vec::new(),
            predicates: Vec::new(),
            actions: Vec::new(),
        },
        type_pos: HashMap::new(),
    };
    let mut action_exprs = Vec::new();
    for section in &items[2..] {
        let parts = section.list()?;
        let head = parts.first().ok_or(DomainError {
            pos: section.pos(),
            kind: DomainErrorKind::Syntax("empty section".into()),
        })?;
        let body = &parts[1..];
        match head.expect_sym()? {
            ":requirements" => b.requirements(body)?,
            ":types" => b.types(body)?,
            ":constants" => b.constants(body)?,
            ":predicates" => b.predicates(body)?,
            ":action" => action_exprs.push((body, section.pos())),
            other => return fail(head.pos(), DomainErrorKind::Unsupported(other.to_string())),
        }
    }
    for (body, pos) in action_exprs {
        let action = b.action(body, pos)?;
        if b.domain.action(&action.name).is_some() {
            return fail(pos, DomainErrorKind::DuplicateName(action.name));
        }
        b.domain.actions.push(action);
    }
    Ok(b.domain)
}

/// Parses a standalone `(:action ...)` block against an existing domain's
/// vocabulary. Used for the human-action models of scoring scenarios.
pub fn parse_action(text: &str, domain: &Domain) -> Result<ActionSchema, DomainError> {
    let top = read_sexprs(text)?;
    let expr = match top.as_slice() {
        [single] => single,
        _ => return syntax(Pos { line: 1, column: 1 }, "expected exactly one `(:action ...)` block"),
    };
    let items = expr.list()?;
    if items.first().and_then(SExpr::sym) != Some(":action") {
        return syntax(expr.pos(), "expected `(:action ...)`");
    }
    let b = Builder {
        domain: domain.clone(),
        type_pos: HashMap::new(),
    };
    b.action(&items[1..], expr.pos())
}
