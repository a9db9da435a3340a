use std::collections::HashMap;
use std::fmt;

use crate::context::Label;
use crate::sexp::Pos;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId(pub u32);

/// A field, identified by its declaring class and name.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldId(pub u32);

/// A parameter or local of one method, unique program-wide.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FjVar(pub u32);

impl ClassId {
    pub const OBJECT: ClassId = ClassId(0);
}

macro_rules! index_impl {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    )*};
}
index_impl!(ClassId, MethodId, FieldId, FjVar);

/// A variable position in a method body.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    This,
    Var(FjVar),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(Slot),
    Field(Slot, String),
    Invoke { receiver: Slot, method: String, args: Vec<Slot> },
    New { class: ClassId, args: Vec<Slot> },
    Cast { class: ClassId, value: Slot },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign { target: FjVar, expr: Expr },
    Return(Slot),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub label: Label,
    pub method: MethodId,
    pub kind: StmtKind,
    pub pos: Pos,
}

/// How a constructor fills its object's fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Konst {
    pub params: Vec<(String, String)>,
    /// Constructor-parameter index passed in each `super(...)` position.
    pub super_args: Vec<usize>,
    /// `this.f = p` for each own field, as (field, parameter index).
    pub assigns: Vec<(FieldId, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub parent: Option<ClassId>,
    /// Own fields in declaration order.
    pub fields: Vec<FieldId>,
    pub konst: Konst,
    pub methods: Vec<MethodId>,
    /// Every field, inherited ones first.
    pub all_fields: Vec<FieldId>,
    /// For each entry of `all_fields`, the constructor parameter that
    /// initializes it.
    pub field_plan: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldInfo {
    pub name: String,
    pub ty: String,
    pub class: ClassId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    /// `None` for the main body.
    pub class: Option<ClassId>,
    pub ret: String,
    pub params: Vec<FjVar>,
    pub locals: Vec<FjVar>,
    pub body: Vec<Label>,
}

impl MethodDecl {
    /// Parameters then locals: everything allocated on entry.
    pub fn vars(&self) -> impl Iterator<Item = FjVar> + '_ {
        self.params.iter().chain(&self.locals).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub ty: String,
    pub method: MethodId,
}

/// A parsed and validated program: the class table plus the main body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FjProgram {
    pub(crate) classes: Vec<ClassDecl>,
    pub(crate) fields: Vec<FieldInfo>,
    pub(crate) methods: Vec<MethodDecl>,
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) stmts: Vec<Stmt>,
    pub(crate) main: MethodId,
    pub(crate) class_names: HashMap<String, ClassId>,
    pub(crate) dispatch: HashMap<(ClassId, String), MethodId>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LookupError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class {class} has no method `{method}`")]
    NoMethod { class: String, method: String },
}

impl FjProgram {
    pub fn main(&self) -> MethodId {
        self.main
    }

    pub fn class(&self, c: ClassId) -> &ClassDecl {
        &self.classes[c.index()]
    }

    pub fn classes(&self) -> impl Iterator<Item = (ClassId, &ClassDecl)> {
        self.classes.iter().enumerate().map(|(i, c)| (ClassId(i as u32), c))
    }

    pub fn class_named(&self, name: &str) -> Option<ClassId> {
        self.class_names.get(name).copied()
    }

    pub fn field(&self, f: FieldId) -> &FieldInfo {
        &self.fields[f.index()]
    }

    pub fn method(&self, m: MethodId) -> &MethodDecl {
        &self.methods[m.index()]
    }

    pub fn methods(&self) -> impl Iterator<Item = (MethodId, &MethodDecl)> {
        self.methods.iter().enumerate().map(|(i, m)| (MethodId(i as u32), m))
    }

    pub fn var(&self, v: FjVar) -> &VarInfo {
        &self.vars[v.index()]
    }

    pub fn stmt(&self, l: Label) -> &Stmt {
        &self.stmts[l.index()]
    }

    pub fn stmts(&self) -> &[Stmt] {
        &self.stmts
    }

    /// The statement following `l` in its body; `None` for returns.
    pub fn succ(&self, l: Label) -> Option<Label> {
        let s = self.stmt(l);
        if matches!(s.kind, StmtKind::Return(_)) {
            return None;
        }
        let body = &self.method(s.method).body;
        let i = body.iter().position(|x| *x == l)?;
        body.get(i + 1).copied()
    }

    /// `C.m`, or `main`.
    pub fn method_display(&self, m: MethodId) -> String {
        let d = self.method(m);
        match d.class {
            Some(c) => format!("{}.{}", self.class(c).name, d.name),
            None => d.name.clone(),
        }
    }

    pub fn var_display(&self, v: FjVar) -> String {
        format!("{}#{}", self.vars[v.index()].name, v.0)
    }

    pub fn field_display(&self, f: FieldId) -> String {
        let info = self.field(f);
        format!("{}.{}", self.class(info.class).name, info.name)
    }

    /// The field called `name` in objects of class `c`, searching inherited
    /// fields too.
    pub fn field_of(&self, c: ClassId, name: &str) -> Option<FieldId> {
        self.class(c).all_fields.iter().copied().find(|f| self.fields[f.index()].name == name)
    }

    /// 𝒞: the field vector of `c` and, for each field, the constructor
    /// argument stored into it.
    pub fn constructor_lookup(&self, c: ClassId) -> (&[FieldId], &[usize]) {
        let d = self.class(c);
        (&d.all_fields, &d.field_plan)
    }

    /// Dynamic dispatch of `name` on an object of class `c`.
    pub fn method_lookup(&self, c: ClassId, name: &str) -> Result<MethodId, LookupError> {
        self.dispatch
            .get(&(c, name.to_string()))
            .copied()
            .ok_or_else(|| LookupError::NoMethod { class: self.class(c).name.clone(), method: name.to_string() })
    }

    /// ℳ̂: every method `name` resolves to over a set of classes.
    pub fn amethod_lookup(&self, classes: impl IntoIterator<Item = ClassId>, name: &str) -> Vec<MethodId> {
        let mut out: Vec<MethodId> = classes.into_iter().filter_map(|c| self.method_lookup(c, name).ok()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn is_subclass(&self, mut c: ClassId, ancestor: ClassId) -> bool {
        loop {
            if c == ancestor {
                return true;
            }
            match self.class(c).parent {
                Some(p) => c = p,
                None => return false,
            }
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::This => f.write_str("this"),
            Slot::Var(v) => write!(f, "v{}", v.0),
        }
    }
}
