//! Syntax trees for the class, activity, page, and application languages.
//!
//! Every node that can be the subject of a diagnostic carries a [`Span`].
//! Spans never take part in equality, so two trees compare equal exactly
//! when they are structurally equal.

use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based line/column of the first token of a node.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BuiltinType {
    String,
    Text,
    Email,
    Date,
    Int,
    Decimal,
    Bool,
}

impl BuiltinType {
    pub const ALL: [BuiltinType; 7] = [
        BuiltinType::String,
        BuiltinType::Text,
        BuiltinType::Email,
        BuiltinType::Date,
        BuiltinType::Int,
        BuiltinType::Decimal,
        BuiltinType::Bool,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinType::String => "String",
            BuiltinType::Text => "Text",
            BuiltinType::Email => "Email",
            BuiltinType::Date => "Date",
            BuiltinType::Int => "Int",
            BuiltinType::Decimal => "Decimal",
            BuiltinType::Bool => "Bool",
        }
    }
}

impl fmt::Display for BuiltinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Class models

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub name: String,
    pub classes: Vec<ClassDef>,
    pub file: String,
}

impl ClassModel {
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn user_classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.iter().filter(|c| c.is_user)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    pub is_user: bool,
    pub attributes: Vec<AttributeDef>,
    pub associations: Vec<AssociationDef>,
    pub span: Span,
}

impl ClassDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn association(&self, role: &str) -> Option<&AssociationDef> {
        self.associations.iter().find(|a| a.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub ty: BuiltinType,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Multiplicity {
    One,
    Many,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationDef {
    pub role: String,
    pub target: String,
    pub multiplicity: Multiplicity,
    pub span: Span,
}

// ---------------------------------------------------------------------------
// Activities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub name: String,
    pub partitions: Vec<Partition>,
    pub actions: Vec<ActionDef>,
    pub edges: Vec<EdgeDef>,
    pub file: String,
}

impl ActivityModel {
    pub fn action(&self, name: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn partition_of(&self, action: &str) -> Option<&Partition> {
        self.partitions
            .iter()
            .find(|p| p.actions.iter().any(|a| a == action))
    }

    pub fn partition(&self, name: &str) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.name == name)
    }

    pub fn initial_edge(&self) -> Option<&EdgeDef> {
        self.edges.iter().find(|e| e.source == NodeRef::Initial)
    }

    /// The edge leaving `action`, if any. Well-formed activities have at most one.
    pub fn outgoing(&self, action: &str) -> Option<&EdgeDef> {
        self.edges.iter().find(|e| e.source.action() == Some(action))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub actions: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDef {
    pub name: String,
    pub in_pins: Vec<ParamDecl>,
    pub out_pins: Vec<ParamDecl>,
    pub vars: Vec<ParamDecl>,
    pub body: Vec<Statement>,
    pub span: Span,
}

impl ActionDef {
    pub fn is_interactive(&self) -> bool {
        self.view_index().is_some()
    }

    pub fn view_index(&self) -> Option<usize> {
        self.body
            .iter()
            .position(|s| matches!(s.kind, StatementKind::View { .. }))
    }

    /// Looks a name up across in-pins, out-pins, and vars.
    pub fn declared(&self, name: &str) -> Option<&ParamDecl> {
        self.in_pins
            .iter()
            .chain(&self.out_pins)
            .chain(&self.vars)
            .find(|p| p.name == name)
    }

    pub fn in_pin(&self, name: &str) -> Option<&ParamDecl> {
        self.in_pins.iter().find(|p| p.name == name)
    }

    pub fn out_pin(&self, name: &str) -> Option<&ParamDecl> {
        self.out_pins.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub ty: TypeRef,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeRef {
    Class(String),
    SetOf(String),
    Builtin(BuiltinType),
}

impl TypeRef {
    pub fn class_name(&self) -> Option<&str> {
        match self {
            TypeRef::Class(c) | TypeRef::SetOf(c) => Some(c),
            TypeRef::Builtin(_) => None,
        }
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Class(c) => f.write_str(c),
            TypeRef::SetOf(c) => write!(f, "Set<{c}>"),
            TypeRef::Builtin(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StatementKind {
    Cmd(Command),
    View { page: String, args: Vec<String> },
    Script(Vec<ScriptStmt>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    LoadAll { assign_to: String, class: String },
    GetActualUser { assign_to: String },
    AssignRole { partition: String, user: String },
    Save { target: String },
    Notify { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStmt {
    pub kind: ScriptKind,
    pub span: Span,
}

impl ScriptStmt {
    pub fn assign(lhs: impl Into<String>, rhs: Expr) -> Self {
        ScriptStmt {
            kind: ScriptKind::Assign {
                lhs: lhs.into(),
                rhs,
            },
            span: Span::default(),
        }
    }

    pub fn invoke(receiver: impl Into<String>, attr: impl Into<String>, arg: Expr) -> Self {
        ScriptStmt {
            kind: ScriptKind::Invoke {
                receiver: receiver.into(),
                attr: attr.into(),
                arg,
            },
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScriptKind {
    Assign { lhs: String, rhs: Expr },
    /// `receiver.setAttr(arg)`: an attribute or association write.
    Invoke {
        receiver: String,
        attr: String,
        arg: Expr,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Var(String),
    New(String),
    Get { receiver: String, attr: String },
    /// `receiver.iterator().next()`
    FirstOf(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDef {
    pub source: NodeRef,
    pub targets: Vec<EdgeTarget>,
    pub span: Span,
}

impl EdgeDef {
    pub fn is_decision(&self) -> bool {
        self.targets.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTarget {
    pub node: NodeRef,
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    Initial,
    Final,
    Action { action: String, pin: Option<String> },
}

impl NodeRef {
    pub fn action(&self) -> Option<&str> {
        match self {
            NodeRef::Action { action, .. } => Some(action),
            _ => None,
        }
    }

    pub fn pin(&self) -> Option<&str> {
        match self {
            NodeRef::Action { pin, .. } => pin.as_deref(),
            _ => None,
        }
    }

    /// Decision option label for this node: the action name, or `final`.
    pub fn label(&self) -> &str {
        match self {
            NodeRef::Initial => "initial",
            NodeRef::Final => "final",
            NodeRef::Action { action, .. } => action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Guard {
    Literal(bool),
    Compare {
        left: Operand,
        op: CompareOp,
        right: Operand,
    },
    Not(Box<Guard>),
    And(Vec<Guard>),
    Or(Vec<Guard>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Var(String),
    Get { receiver: String, attr: String },
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Str(String),
    Int(i64),
    Decimal(f64),
    Bool(bool),
    Null,
}

// ---------------------------------------------------------------------------
// Pages

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageModel {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub elements: Vec<PageElement>,
    pub file: String,
}

impl PageModel {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageElement {
    pub kind: ElementKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ElementKind {
    Heading { level: u8, text: String },
    Text(String),
    Output { param: String, attr: Option<String> },
    Input { param: String, attr: String },
    Table {
        param: String,
        selectable: bool,
        columns: Vec<String>,
    },
}

// ---------------------------------------------------------------------------
// Application

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppModel {
    pub name: String,
    pub roles: Vec<String>,
    pub menu: Vec<MenuEntry>,
    pub rights: Vec<RightRule>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    pub target: EntryRef,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryRef {
    Page(String),
    Activity(String),
    Class { class: String, mode: ClassPageMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassPageMode {
    List,
    Create,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightRule {
    pub role: String,
    pub allowed: Vec<MenuEntry>,
    pub span: Span,
}
