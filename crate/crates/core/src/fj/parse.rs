//! Parser and validator for the Java-like concrete syntax.
//!
//! ```text
//! class C extends D { T f; C(T f, ...) { super(g, ...); this.f = f; } T m(T x) { T y; y = x.f; return y; } }
//! main { C c; c = new C(); return c; }
//! ```

use std::collections::{HashMap, HashSet};

use super::syntax::*;
use crate::context::Label;
use crate::sexp::Pos;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FjParseError {
    #[error("{pos}: {message}")]
    Syntax { message: String, pos: Pos },
    #[error("{pos}: method arguments and receivers must be variables (A-normal form)")]
    NotANormal { pos: Pos },
    #[error("{pos}: {message}")]
    Invalid { message: String, pos: Pos },
}

fn syntax(pos: Pos, message: impl Into<String>) -> FjParseError {
    FjParseError::Syntax { message: message.into(), pos }
}

fn invalid(pos: Pos, message: impl Into<String>) -> FjParseError {
    FjParseError::Invalid { message: message.into(), pos }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(char),
    Eof,
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, FjParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            loop {
                if i + 1 >= chars.len() {
                    return Err(syntax(pos, "unterminated comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, &mut line, &mut col);
                    advance(&mut i, &mut line, &mut col);
                    break;
                }
                advance(&mut i, &mut line, &mut col);
            }
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col);
            }
            out.push((Tok::Ident(s), pos));
        } else if "(){};,.=".contains(c) {
            out.push((Tok::Punct(c), pos));
            advance(&mut i, &mut line, &mut col);
        } else {
            return Err(syntax(pos, format!("unexpected character `{c}`")));
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

type Name = (String, Pos);

#[derive(Debug)]
enum RawExpr {
    Var(Name),
    Field(Name, Name),
    Invoke(Name, Name, Vec<Name>),
    New(Name, Vec<Name>),
    Cast(Name, Name),
}

#[derive(Debug)]
enum RawItem {
    Decl { ty: Name, name: Name },
    Assign { target: Name, expr: RawExpr, pos: Pos },
    Return { value: Name, pos: Pos },
}

#[derive(Debug)]
struct RawCtor {
    name: Name,
    params: Vec<(Name, Name)>,
    super_args: Vec<Name>,
    assigns: Vec<(Name, Name)>,
}

#[derive(Debug)]
struct RawMethod {
    ret: Name,
    name: Name,
    params: Vec<(Name, Name)>,
    body: Vec<RawItem>,
    end: Pos,
}

#[derive(Debug)]
struct RawClass {
    name: Name,
    parent: Name,
    fields: Vec<(Name, Name)>,
    ctor: Option<RawCtor>,
    methods: Vec<RawMethod>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

const KEYWORDS: &[&str] = &["class", "extends", "super", "this", "new", "return", "main"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.i + n).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, c: char) -> Result<Pos, FjParseError> {
        let (t, pos) = self.bump();
        if t == Tok::Punct(c) {
            Ok(pos)
        } else {
            Err(syntax(pos, format!("expected `{c}`, found {}", describe(&t))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Pos, FjParseError> {
        let (t, pos) = self.bump();
        match t {
            Tok::Ident(s) if s == kw => Ok(pos),
            t => Err(syntax(pos, format!("expected `{kw}`, found {}", describe(&t)))),
        }
    }

    /// An identifier that is not a keyword.
    fn name(&mut self) -> Result<Name, FjParseError> {
        let (t, pos) = self.bump();
        match t {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s, pos)),
            t => Err(syntax(pos, format!("expected a name, found {}", describe(&t)))),
        }
    }

    /// A variable operand: a name or `this`, not followed by a selector.
    fn operand(&mut self) -> Result<Name, FjParseError> {
        let v = if self.is_kw("this") {
            let (_, pos) = self.bump();
            ("this".to_string(), pos)
        } else if self.is_kw("new") || self.is_punct('(') {
            return Err(FjParseError::NotANormal { pos: self.pos() });
        } else {
            self.name()?
        };
        if self.is_punct('.') || self.is_punct('(') {
            return Err(FjParseError::NotANormal { pos: v.1 });
        }
        Ok(v)
    }

    fn operands(&mut self) -> Result<Vec<Name>, FjParseError> {
        self.expect_punct('(')?;
        let mut out = Vec::new();
        if self.is_punct(')') {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(self.operand()?);
            let (t, pos) = self.bump();
            match t {
                Tok::Punct(')') => return Ok(out),
                Tok::Punct(',') => {}
                t => return Err(syntax(pos, format!("expected `,` or `)`, found {}", describe(&t)))),
            }
        }
    }

    fn typed_params(&mut self) -> Result<Vec<(Name, Name)>, FjParseError> {
        self.expect_punct('(')?;
        let mut out = Vec::new();
        if self.is_punct(')') {
            self.bump();
            return Ok(out);
        }
        loop {
            let ty = self.name()?;
            let name = self.name()?;
            out.push((ty, name));
            let (t, pos) = self.bump();
            match t {
                Tok::Punct(')') => return Ok(out),
                Tok::Punct(',') => {}
                t => return Err(syntax(pos, format!("expected `,` or `)`, found {}", describe(&t)))),
            }
        }
    }

    fn expr(&mut self) -> Result<RawExpr, FjParseError> {
        if self.is_kw("new") {
            self.bump();
            let class = self.name()?;
            let args = self.operands()?;
            return Ok(RawExpr::New(class, args));
        }
        if self.is_punct('(') {
            self.bump();
            let class = self.name()?;
            self.expect_punct(')')?;
            let v = self.operand()?;
            return Ok(RawExpr::Cast(class, v));
        }
        let recv = if self.is_kw("this") {
            let (_, pos) = self.bump();
            ("this".to_string(), pos)
        } else {
            self.name()?
        };
        if !self.is_punct('.') {
            if self.is_punct('(') {
                return Err(syntax(self.pos(), "calls need an explicit receiver"));
            }
            return Ok(RawExpr::Var(recv));
        }
        self.bump();
        let member = self.name()?;
        if self.is_punct('(') {
            let args = self.operands()?;
            Ok(RawExpr::Invoke(recv, member, args))
        } else {
            if self.is_punct('.') {
                return Err(FjParseError::NotANormal { pos: member.1 });
            }
            Ok(RawExpr::Field(recv, member))
        }
    }

    fn body(&mut self) -> Result<(Vec<RawItem>, Pos), FjParseError> {
        self.expect_punct('{')?;
        let mut items = Vec::new();
        loop {
            if self.is_punct('}') {
                let (_, end) = self.bump();
                return Ok((items, end));
            }
            let pos = self.pos();
            if self.is_kw("return") {
                self.bump();
                let value = self.operand()?;
                self.expect_punct(';')?;
                items.push(RawItem::Return { value, pos });
                continue;
            }
            // `T v;`, `T v = e;` or `v = e;`
            if matches!(self.peek_at(1), Tok::Ident(_)) {
                let ty = self.name()?;
                let name = self.name()?;
                items.push(RawItem::Decl { ty, name: name.clone() });
                if self.is_punct('=') {
                    self.bump();
                    let expr = self.expr()?;
                    items.push(RawItem::Assign { target: name, expr, pos });
                }
                self.expect_punct(';')?;
                continue;
            }
            let target = self.name()?;
            self.expect_punct('=')?;
            let expr = self.expr()?;
            self.expect_punct(';')?;
            items.push(RawItem::Assign { target, expr, pos });
        }
    }

    fn ctor(&mut self, name: Name) -> Result<RawCtor, FjParseError> {
        let params = self.typed_params()?;
        self.expect_punct('{')?;
        self.expect_kw("super")?;
        let super_args = self.operands()?;
        self.expect_punct(';')?;
        let mut assigns = Vec::new();
        while !self.is_punct('}') {
            self.expect_kw("this")?;
            self.expect_punct('.')?;
            let f = self.name()?;
            self.expect_punct('=')?;
            let v = self.operand()?;
            self.expect_punct(';')?;
            assigns.push((f, v));
        }
        self.bump();
        Ok(RawCtor { name, params, super_args, assigns })
    }

    fn class(&mut self) -> Result<RawClass, FjParseError> {
        self.expect_kw("class")?;
        let name = self.name()?;
        self.expect_kw("extends")?;
        let parent = self.name()?;
        self.expect_punct('{')?;
        let mut c = RawClass { name, parent, fields: Vec::new(), ctor: None, methods: Vec::new() };
        while !self.is_punct('}') {
            let first = self.name()?;
            if self.is_punct('(') {
                if first.0 != c.name.0 {
                    return Err(syntax(first.1, format!("constructor must be named `{}`", c.name.0)));
                }
                if c.ctor.is_some() {
                    return Err(invalid(first.1, "duplicate constructor"));
                }
                c.ctor = Some(self.ctor(first)?);
                continue;
            }
            let second = self.name()?;
            if self.is_punct(';') {
                self.bump();
                c.fields.push((first, second));
            } else {
                let params = self.typed_params()?;
                let (body, end) = self.body()?;
                c.methods.push(RawMethod { ret: first, name: second, params, body, end });
            }
        }
        self.bump();
        Ok(c)
    }

    fn program(&mut self) -> Result<(Vec<RawClass>, RawMethod), FjParseError> {
        let mut classes = Vec::new();
        while self.is_kw("class") {
            classes.push(self.class()?);
        }
        let pos = self.expect_kw("main")?;
        let (body, end) = self.body()?;
        let main = RawMethod { ret: ("Object".into(), pos), name: ("main".into(), pos), params: Vec::new(), body, end };
        let (t, pos) = self.bump();
        if t != Tok::Eof {
            return Err(syntax(pos, format!("unexpected {} after main", describe(&t))));
        }
        Ok((classes, main))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::Eof => "end of input".into(),
    }
}

struct Resolver {
    prog: FjProgram,
}

impl Resolver {
    fn class_id(&self, n: &Name) -> Result<ClassId, FjParseError> {
        self.prog.class_names.get(&n.0).copied().ok_or_else(|| invalid(n.1, format!("unknown class `{}`", n.0)))
    }

    fn method(&mut self, raw: &RawMethod, class: Option<ClassId>, id: MethodId) -> Result<MethodDecl, FjParseError> {
        self.class_id(&raw.ret)?;
        let mut scope: HashMap<String, FjVar> = HashMap::new();
        let mut declare = |r: &mut Resolver, ty: &Name, name: &Name| -> Result<FjVar, FjParseError> {
            r.class_id(ty)?;
            if scope.contains_key(&name.0) {
                return Err(invalid(name.1, format!("`{}` is declared twice", name.0)));
            }
            let v = FjVar(r.prog.vars.len() as u32);
            r.prog.vars.push(VarInfo { name: name.0.clone(), ty: ty.0.clone(), method: id });
            scope.insert(name.0.clone(), v);
            Ok(v)
        };
        let mut params = Vec::new();
        for (ty, name) in &raw.params {
            params.push(declare(self, ty, name)?);
        }
        let mut locals = Vec::new();
        for item in &raw.body {
            if let RawItem::Decl { ty, name } = item {
                locals.push(declare(self, ty, name)?);
            }
        }
        let slot = |n: &Name| -> Result<Slot, FjParseError> {
            if n.0 == "this" {
                if class.is_none() {
                    return Err(invalid(n.1, "`this` is not available in main"));
                }
                return Ok(Slot::This);
            }
            scope.get(&n.0).map(|v| Slot::Var(*v)).ok_or_else(|| invalid(n.1, format!("undeclared variable `{}`", n.0)))
        };
        let mut body = Vec::new();
        let mut returned = false;
        for item in &raw.body {
            let (kind, pos) = match item {
                RawItem::Decl { .. } => continue,
                RawItem::Return { value, pos } => (StmtKind::Return(slot(value)?), *pos),
                RawItem::Assign { target, expr, pos } => {
                    let target = match slot(target)? {
                        Slot::Var(v) => v,
                        Slot::This => return Err(invalid(target.1, "cannot assign to `this`")),
                    };
                    let expr = match expr {
                        RawExpr::Var(v) => Expr::Var(slot(v)?),
                        RawExpr::Field(v, f) => Expr::Field(slot(v)?, f.0.clone()),
                        RawExpr::Invoke(r, m, args) => Expr::Invoke {
                            receiver: slot(r)?,
                            method: m.0.clone(),
                            args: args.iter().map(&slot).collect::<Result<_, _>>()?,
                        },
                        RawExpr::New(c, args) => {
                            let class = self.class_id(c)?;
                            let arity = self.prog.class(class).konst.params.len();
                            if arity != args.len() {
                                return Err(invalid(
                                    c.1,
                                    format!("constructor of `{}` takes {arity} arguments, got {}", c.0, args.len()),
                                ));
                            }
                            Expr::New { class, args: args.iter().map(&slot).collect::<Result<_, _>>()? }
                        }
                        RawExpr::Cast(c, v) => Expr::Cast { class: self.class_id(c)?, value: slot(v)? },
                    };
                    (StmtKind::Assign { target, expr }, *pos)
                }
            };
            if returned {
                return Err(invalid(pos, "statement after return"));
            }
            returned = matches!(kind, StmtKind::Return(_));
            let label = Label(self.prog.stmts.len() as u32);
            self.prog.stmts.push(Stmt { label, method: id, kind, pos });
            body.push(label);
        }
        if !returned {
            return Err(invalid(raw.end, format!("body of `{}` must end with a return", raw.name.0)));
        }
        Ok(MethodDecl { name: raw.name.0.clone(), class, ret: raw.ret.0.clone(), params, locals, body })
    }
}

/// Parses and validates a program.
pub fn parse_fj(source: &str) -> Result<FjProgram, FjParseError> {
    let mut p = Parser { toks: lex(source)?, i: 0 };
    let (raw_classes, raw_main) = p.program()?;

    let object = ClassDecl {
        name: "Object".into(),
        parent: None,
        fields: Vec::new(),
        konst: Konst { params: Vec::new(), super_args: Vec::new(), assigns: Vec::new() },
        methods: Vec::new(),
        all_fields: Vec::new(),
        field_plan: Vec::new(),
    };
    let mut r = Resolver {
        prog: FjProgram {
            classes: vec![object],
            fields: Vec::new(),
            methods: Vec::new(),
            vars: Vec::new(),
            stmts: Vec::new(),
            main: MethodId(0),
            class_names: HashMap::from([("Object".to_string(), ClassId::OBJECT)]),
            dispatch: HashMap::new(),
        },
    };

    for (i, c) in raw_classes.iter().enumerate() {
        if r.prog.class_names.insert(c.name.0.clone(), ClassId(i as u32 + 1)).is_some() {
            return Err(invalid(c.name.1, format!("class `{}` is declared twice", c.name.0)));
        }
    }
    let mut parents = Vec::new();
    for c in &raw_classes {
        parents.push(r.class_id(&c.parent)?);
    }
    // Reject cycles before walking chains.
    for (i, c) in raw_classes.iter().enumerate() {
        let mut seen = HashSet::new();
        let mut cur = ClassId(i as u32 + 1);
        while cur != ClassId::OBJECT {
            if !seen.insert(cur) {
                return Err(invalid(c.name.1, format!("inheritance cycle through `{}`", c.name.0)));
            }
            cur = parents[cur.index() - 1];
        }
    }
    for (i, c) in raw_classes.iter().enumerate() {
        let id = ClassId(i as u32 + 1);
        let mut own = Vec::new();
        for (ty, f) in &c.fields {
            r.class_id(ty)?;
            own.push(FieldId(r.prog.fields.len() as u32));
            r.prog.fields.push(FieldInfo { name: f.0.clone(), ty: ty.0.clone(), class: id });
        }
        let ctor =
            c.ctor.as_ref().ok_or_else(|| invalid(c.name.1, format!("class `{}` has no constructor", c.name.0)))?;
        let mut pnames: HashMap<&str, usize> = HashMap::new();
        for (j, (ty, n)) in ctor.params.iter().enumerate() {
            r.class_id(ty)?;
            if pnames.insert(n.0.as_str(), j).is_some() {
                return Err(invalid(n.1, format!("duplicate constructor parameter `{}`", n.0)));
            }
        }
        let param = |n: &Name| {
            pnames
                .get(n.0.as_str())
                .copied()
                .ok_or_else(|| invalid(n.1, format!("`{}` is not a constructor parameter", n.0)))
        };
        let super_args = ctor.super_args.iter().map(param).collect::<Result<Vec<_>, _>>()?;
        let mut assigns = Vec::new();
        for (f, v) in &ctor.assigns {
            let fid = own
                .iter()
                .copied()
                .find(|x| r.prog.fields[x.index()].name == f.0)
                .ok_or_else(|| invalid(f.1, format!("`{}` is not a field declared by `{}`", f.0, c.name.0)))?;
            if assigns.iter().any(|(x, _)| *x == fid) {
                return Err(invalid(f.1, format!("field `{}` assigned twice", f.0)));
            }
            assigns.push((fid, param(v)?));
        }
        if assigns.len() != own.len() {
            return Err(invalid(ctor.name.1, format!("constructor of `{}` must assign every field", c.name.0)));
        }
        r.prog.classes.push(ClassDecl {
            name: c.name.0.clone(),
            parent: Some(parents[i]),
            fields: own,
            konst: Konst {
                params: ctor.params.iter().map(|(t, n)| (t.0.clone(), n.0.clone())).collect(),
                super_args,
                assigns,
            },
            methods: Vec::new(),
            all_fields: Vec::new(),
            field_plan: Vec::new(),
        });
    }

    // Field vectors and constructor plans, parents before children.
    let mut done = vec![false; r.prog.classes.len()];
    done[0] = true;
    fn layout(r: &mut Resolver, done: &mut [bool], c: ClassId, raw: &[RawClass]) -> Result<(), FjParseError> {
        if done[c.index()] {
            return Ok(());
        }
        let parent = r.prog.classes[c.index()].parent.unwrap();
        layout(r, done, parent, raw)?;
        let rc = &raw[c.index() - 1];
        let pd = &r.prog.classes[parent.index()];
        let (p_fields, p_plan, p_arity) = (pd.all_fields.clone(), pd.field_plan.clone(), pd.konst.params.len());
        let d = &r.prog.classes[c.index()];
        let ctor_pos = rc.ctor.as_ref().unwrap().name.1;
        if d.konst.super_args.len() != p_arity {
            return Err(invalid(
                ctor_pos,
                format!("super call passes {} arguments, parent expects {p_arity}", d.konst.super_args.len()),
            ));
        }
        let mut all = p_fields;
        let mut plan: Vec<usize> = p_plan.iter().map(|j| d.konst.super_args[*j]).collect();
        for f in &d.fields {
            let name = &r.prog.fields[f.index()].name;
            if all.iter().any(|g| r.prog.fields[g.index()].name == *name) {
                let pos = rc.fields.iter().find(|(_, n)| n.0 == *name).map_or(ctor_pos, |(_, n)| n.1);
                return Err(invalid(pos, format!("field `{name}` is already declared by a superclass")));
            }
            all.push(*f);
            plan.push(d.konst.assigns.iter().find(|(g, _)| g == f).unwrap().1);
        }
        let d = &mut r.prog.classes[c.index()];
        d.all_fields = all;
        d.field_plan = plan;
        done[c.index()] = true;
        Ok(())
    }
    for i in 1..r.prog.classes.len() {
        layout(&mut r, &mut done, ClassId(i as u32), &raw_classes)?;
    }

    // Methods first (in class order), then main, so labels follow the text.
    for (i, c) in raw_classes.iter().enumerate() {
        let cid = ClassId(i as u32 + 1);
        let mut names = HashSet::new();
        for m in &c.methods {
            if !names.insert(m.name.0.clone()) {
                return Err(invalid(m.name.1, format!("method `{}` is declared twice", m.name.0)));
            }
            let id = MethodId(r.prog.methods.len() as u32);
            // Reserve the slot so nested ids stay dense.
            r.prog.methods.push(MethodDecl {
                name: String::new(),
                class: None,
                ret: String::new(),
                params: Vec::new(),
                locals: Vec::new(),
                body: Vec::new(),
            });
            let decl = r.method(m, Some(cid), id)?;
            r.prog.methods[id.index()] = decl;
            r.prog.classes[cid.index()].methods.push(id);
        }
    }
    let main = MethodId(r.prog.methods.len() as u32);
    r.prog.methods.push(MethodDecl {
        name: String::new(),
        class: None,
        ret: String::new(),
        params: Vec::new(),
        locals: Vec::new(),
        body: Vec::new(),
    });
    let decl = r.method(&raw_main, None, main)?;
    r.prog.methods[main.index()] = decl;
    r.prog.main = main;

    for i in 0..r.prog.classes.len() {
        let cid = ClassId(i as u32);
        let mut cur = Some(cid);
        while let Some(c) = cur {
            for m in r.prog.classes[c.index()].methods.clone() {
                let name = r.prog.methods[m.index()].name.clone();
                r.prog.dispatch.entry((cid, name)).or_insert(m);
            }
            cur = r.prog.classes[c.index()].parent;
        }
    }
    Ok(r.prog)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = "
        class A extends Object { A() { super(); } }
        class Pair extends Object {
            Object fst; Object snd;
            Pair(Object fst, Object snd) { super(); this.fst = fst; this.snd = snd; }
            Object getFst() { Object r; r = this.fst; return r; }
        }
        class Triple extends Pair {
            Object thd;
            Triple(Object a, Object b, Object c) { super(b, a); this.thd = c; }
            Object getFst() { Object r = this.thd; return r; }
        }
        main { A a = new A(); Pair p = new Pair(a, a); Object r = p.getFst(); return r; }
    ";

    #[test]
    fn anf_example_has_three_statements() {
        let src = "class B extends Object { B() { super(); } B bar() { return this; } }
                   class F extends Object { F() { super(); } F foo(B b) { return this; } }
                   main { B b; F f; b = new B(); f = new F(); B b1 = b.bar(); F f1 = f.foo(b1); return f1; }";
        let p = parse_fj(src).unwrap();
        let main = p.method(p.main());
        assert_eq!(main.body.len(), 5);
        let tail: Vec<_> = main.body[2..].iter().map(|l| &p.stmt(*l).kind).collect();
        assert!(matches!(tail[0], StmtKind::Assign { expr: Expr::Invoke { .. }, .. }));
        assert!(matches!(tail[1], StmtKind::Assign { expr: Expr::Invoke { .. }, .. }));
        assert!(matches!(tail[2], StmtKind::Return(_)));
    }

    #[test]
    fn nested_calls_are_rejected() {
        let src =
            "class F extends Object { F() { super(); } F foo(F b) { return f.foo(b.bar()); } } main { F f; return f; }";
        assert!(matches!(parse_fj(src), Err(FjParseError::NotANormal { .. })));
        let src = "class F extends Object { F() { super(); } } main { F f; F g; g = f.foo(f.bar()); return g; }";
        assert!(matches!(parse_fj(src), Err(FjParseError::NotANormal { .. })));
    }

    #[test]
    fn empty_class_has_no_fields() {
        let p = parse_fj("class A extends Object { A(){super();} } main { A a = new A(); return a; }").unwrap();
        let a = p.class_named("A").unwrap();
        assert!(p.constructor_lookup(a).0.is_empty());
    }

    #[test]
    fn inherited_fields_come_first_and_super_args_route() {
        let p = parse_fj(PAIR).unwrap();
        let t = p.class_named("Triple").unwrap();
        let (fields, plan) = p.constructor_lookup(t);
        let names: Vec<&str> = fields.iter().map(|f| p.field(*f).name.as_str()).collect();
        assert_eq!(names, ["fst", "snd", "thd"]);
        // Triple(a, b, c) calls Pair(b, a): fst ← b, snd ← a, thd ← c.
        assert_eq!(plan, &[1, 0, 2]);
    }

    #[test]
    fn dispatch_walks_the_chain() {
        let p = parse_fj(PAIR).unwrap();
        let pair = p.class_named("Pair").unwrap();
        let triple = p.class_named("Triple").unwrap();
        let a = p.class_named("A").unwrap();
        assert_eq!(p.method_display(p.method_lookup(pair, "getFst").unwrap()), "Pair.getFst");
        assert_eq!(p.method_display(p.method_lookup(triple, "getFst").unwrap()), "Triple.getFst");
        assert!(p.method_lookup(a, "getFst").is_err());
        assert_eq!(p.amethod_lookup([pair, triple, a], "getFst").len(), 2);
        assert!(p.is_subclass(triple, pair) && !p.is_subclass(pair, triple));
    }

    #[test]
    fn succ_is_undefined_exactly_on_returns() {
        let p = parse_fj(PAIR).unwrap();
        for s in p.stmts() {
            assert_eq!(p.succ(s.label).is_none(), matches!(s.kind, StmtKind::Return(_)));
        }
    }

    #[test]
    fn validation_errors_carry_positions() {
        let err = parse_fj("class A extends B { A() { super(); } }\nmain { return x; }").unwrap_err();
        assert_eq!(err, FjParseError::Invalid { message: "unknown class `B`".into(), pos: Pos { line: 1, col: 17 } });
        let err = parse_fj("main { Object x; }").unwrap_err();
        assert!(err.to_string().contains("must end with a return"), "{err}");
        let err =
            parse_fj("class A extends Object { Object f; A(Object g) { super(); } } main { return x; }").unwrap_err();
        assert!(err.to_string().contains("assign every field"), "{err}");
        let err = parse_fj("main { Object x; return y; }").unwrap_err();
        assert!(err.to_string().contains("undeclared"), "{err}");
        let err = parse_fj("class A extends A { A() { super(); } } main { Object x; return x; }").unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
        let err = parse_fj("main { Object x; return x; x = x; }").unwrap_err();
        assert!(err.to_string().contains("after return"), "{err}");
        let err = parse_fj("main { Object x; return x; } %").unwrap_err();
        assert!(matches!(err, FjParseError::Syntax { pos: Pos { line: 1, col: 30 }, .. }), "{err:?}");
    }
}
