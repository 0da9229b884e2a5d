//! Random syntax trees that satisfy the parsers' single-file checks, for
//! round-trip testing. Names carry prefixes no keyword starts with.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use wisflow_core::syntax::ast::*;

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn suffix(rng: &mut dyn RngCore, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| LETTERS[rng.gen_range(0..LETTERS.len())] as char).collect()
}

/// `prefix` + index + random tail, unique within one call site by index.
fn name(rng: &mut dyn RngCore, prefix: &str, index: usize) -> String {
    format!("{prefix}{index}{}", suffix(rng, 3))
}

fn text(rng: &mut dyn RngCore) -> String {
    const CHARS: &[char] = &['a', 'B', ' ', '.', '"', '\\', '\n', '\t', 'é', '7', '{', ';', '/'];
    let len = rng.gen_range(0..10);
    (0..len).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

fn span() -> Span {
    Span::new(0, 0)
}

fn builtin(rng: &mut dyn RngCore) -> BuiltinType {
    *BuiltinType::ALL.choose(rng).unwrap()
}

fn type_ref(rng: &mut dyn RngCore, classes: &[String]) -> TypeRef {
    let class = classes.choose(rng).cloned().unwrap_or_else(|| "Qc".into());
    match rng.gen_range(0..3) {
        0 => TypeRef::Class(class),
        1 => TypeRef::SetOf(class),
        _ => TypeRef::Builtin(builtin(rng)),
    }
}

fn class_names(rng: &mut dyn RngCore) -> Vec<String> {
    (0..rng.gen_range(1..4)).map(|i| name(rng, "Qc", i)).collect()
}

pub fn class_model(rng: &mut dyn RngCore) -> ClassModel {
    let names = class_names(rng);
    let classes = names
        .iter()
        .map(|n| {
            let attributes = (0..rng.gen_range(0..4))
                .map(|i| AttributeDef {
                    name: name(rng, "qa", i),
                    ty: builtin(rng),
                    span: span(),
                })
                .collect();
            let associations = (0..rng.gen_range(0..3))
                .map(|i| AssociationDef {
                    role: name(rng, "qr", i),
                    target: names.choose(rng).unwrap().clone(),
                    multiplicity: if rng.gen() { Multiplicity::One } else { Multiplicity::Many },
                    span: span(),
                })
                .collect();
            ClassDef {
                name: n.clone(),
                is_user: rng.gen_bool(0.3),
                attributes,
                associations,
                span: span(),
            }
        })
        .collect();
    ClassModel {
        name: name(rng, "Qm", 0),
        classes,
        file: "gen.cd".into(),
    }
}

fn literal(rng: &mut dyn RngCore) -> Literal {
    match rng.gen_range(0..5) {
        0 => Literal::Str(text(rng)),
        1 => Literal::Int(rng.gen_range(-1_000_000_000..1_000_000_000)),
        2 => Literal::Decimal(f64::from(rng.gen_range(-100_000i32..100_000)) / 100.0),
        3 => Literal::Bool(rng.gen()),
        _ => Literal::Null,
    }
}

fn operand(rng: &mut dyn RngCore, names: &[String]) -> Operand {
    match (rng.gen_range(0..3), names.choose(rng)) {
        (0, Some(n)) => Operand::Var(n.clone()),
        (1, Some(n)) => Operand::Get {
            receiver: n.clone(),
            attr: name(rng, "qa", 0),
        },
        _ => Operand::Literal(literal(rng)),
    }
}

pub fn guard(rng: &mut dyn RngCore, names: &[String], depth: u32) -> Guard {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return if rng.gen_bool(0.3) {
            Guard::Literal(rng.gen())
        } else {
            Guard::Compare {
                left: operand(rng, names),
                op: if rng.gen() { CompareOp::Eq } else { CompareOp::Ne },
                right: operand(rng, names),
            }
        };
    }
    match rng.gen_range(0..3) {
        0 => Guard::Not(Box::new(guard(rng, names, depth - 1))),
        1 => Guard::And((0..rng.gen_range(2..4)).map(|_| guard(rng, names, depth - 1)).collect()),
        _ => Guard::Or((0..rng.gen_range(2..4)).map(|_| guard(rng, names, depth - 1)).collect()),
    }
}

fn expr(rng: &mut dyn RngCore, names: &[String], classes: &[String]) -> Expr {
    let n = names.choose(rng).unwrap().clone();
    match rng.gen_range(0..4) {
        0 => Expr::Var(n),
        1 => Expr::New(classes.choose(rng).unwrap().clone()),
        2 => Expr::Get {
            receiver: n,
            attr: name(rng, "qa", 0),
        },
        _ => Expr::FirstOf(n),
    }
}

fn statement(rng: &mut dyn RngCore, names: &[String], classes: &[String]) -> StatementKind {
    if names.is_empty() {
        return StatementKind::Cmd(Command::Notify { message: text(rng) });
    }
    let pick = |rng: &mut dyn RngCore| names.choose(rng).unwrap().clone();
    match rng.gen_range(0..6) {
        0 => StatementKind::Cmd(Command::LoadAll {
            assign_to: pick(rng),
            class: classes.choose(rng).unwrap().clone(),
        }),
        1 => StatementKind::Cmd(Command::GetActualUser { assign_to: pick(rng) }),
        2 => StatementKind::Cmd(Command::AssignRole {
            partition: name(rng, "R", 0),
            user: pick(rng),
        }),
        3 => StatementKind::Cmd(Command::Save { target: pick(rng) }),
        4 => StatementKind::Cmd(Command::Notify { message: text(rng) }),
        _ => StatementKind::Script(
            (0..rng.gen_range(0..4))
                .map(|_| {
                    if rng.gen() {
                        ScriptStmt::assign(pick(rng), expr(rng, names, classes))
                    } else {
                        ScriptStmt::invoke(pick(rng), name(rng, "qa", 0), expr(rng, names, classes))
                    }
                })
                .collect(),
        ),
    }
}

fn action(rng: &mut dyn RngCore, action_name: String, classes: &[String]) -> ActionDef {
    let mut index = 0;
    let mut decls = |rng: &mut dyn rand::RngCore, max: usize| -> Vec<ParamDecl> {
        (0..rng.gen_range(0..=max))
            .map(|_| {
                index += 1;
                ParamDecl {
                    name: format!("q{index}{}", suffix(rng, 2)),
                    ty: type_ref(rng, classes),
                    span: span(),
                }
            })
            .collect()
    };
    let in_pins = decls(rng, 2);
    let out_pins = decls(rng, 2);
    let vars = decls(rng, 3);
    let names: Vec<String> = in_pins.iter().chain(&out_pins).chain(&vars).map(|d| d.name.clone()).collect();
    let mut body: Vec<Statement> = (0..rng.gen_range(0..4))
        .map(|_| Statement {
            kind: statement(rng, &names, classes),
            span: span(),
        })
        .collect();
    if rng.gen() {
        let at = rng.gen_range(0..=body.len());
        let args = names.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        body.insert(
            at,
            Statement {
                kind: StatementKind::View {
                    page: name(rng, "P", 0),
                    args,
                },
                span: span(),
            },
        );
    }
    ActionDef {
        name: action_name,
        in_pins,
        out_pins,
        vars,
        body,
        span: span(),
    }
}

fn node(rng: &mut dyn RngCore, actions: &[ActionDef]) -> NodeRef {
    if rng.gen_bool(0.2) {
        return NodeRef::Final;
    }
    let a = actions.choose(rng).unwrap();
    NodeRef::Action {
        action: a.name.clone(),
        pin: a.in_pins.choose(rng).filter(|_| rng.gen()).map(|p| p.name.clone()),
    }
}

pub fn activity(rng: &mut dyn RngCore) -> ActivityModel {
    let classes = class_names(rng);
    let actions: Vec<ActionDef> = (0..rng.gen_range(1..6))
        .map(|i| {
            let n = name(rng, "A", i);
            action(rng, n, &classes)
        })
        .collect();

    let mut unassigned: Vec<&ActionDef> = actions.iter().collect();
    unassigned.shuffle(rng);
    let partitions = (0..rng.gen_range(0..3))
        .map(|i| {
            let take = rng.gen_range(0..=unassigned.len());
            Partition {
                name: name(rng, "R", i),
                actions: unassigned.drain(..take).map(|a| a.name.clone()).collect(),
                span: span(),
            }
        })
        .collect();

    let mut edges = vec![EdgeDef {
        source: NodeRef::Initial,
        targets: (0..rng.gen_range(1..3))
            .map(|_| EdgeTarget {
                node: match node(rng, &actions) {
                    NodeRef::Final => NodeRef::Action {
                        action: actions[0].name.clone(),
                        pin: None,
                    },
                    n => n,
                },
                guard: None,
            })
            .collect(),
        span: span(),
    }];
    for a in &actions {
        if rng.gen_bool(0.2) {
            continue;
        }
        let names: Vec<String> = a.declared_names().map(str::to_string).collect();
        let count = rng.gen_range(1..4);
        let targets = (0..count)
            .map(|_| EdgeTarget {
                node: node(rng, &actions),
                guard: (count > 1 && rng.gen()).then(|| guard(rng, &names, 3)),
            })
            .collect();
        edges.push(EdgeDef {
            source: NodeRef::Action {
                action: a.name.clone(),
                pin: a.out_pins.choose(rng).filter(|_| rng.gen()).map(|p| p.name.clone()),
            },
            targets,
            span: span(),
        });
    }
    edges.shuffle(rng);
    ActivityModel {
        name: name(rng, "F", 0),
        partitions,
        actions,
        edges,
        file: "gen.act".into(),
    }
}

trait DeclaredNames {
    fn declared_names(&self) -> Box<dyn Iterator<Item = &str> + '_>;
}

impl DeclaredNames for ActionDef {
    fn declared_names(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        Box::new(self.in_pins.iter().chain(&self.out_pins).chain(&self.vars).map(|d| d.name.as_str()))
    }
}

pub fn page(rng: &mut dyn RngCore) -> PageModel {
    let classes = class_names(rng);
    let params: Vec<ParamDecl> = (0..rng.gen_range(0..3))
        .map(|i| ParamDecl {
            name: name(rng, "qp", i),
            ty: type_ref(rng, &classes),
            span: span(),
        })
        .collect();
    let param = |rng: &mut dyn RngCore| {
        params
            .choose(rng)
            .map(|p| p.name.clone())
            .unwrap_or_else(|| "qx".to_string())
    };
    let elements = (0..rng.gen_range(0..6))
        .map(|_| {
            let kind = match rng.gen_range(0..5) {
                0 => ElementKind::Heading {
                    level: rng.gen_range(1..=3),
                    text: text(rng),
                },
                1 => ElementKind::Text(text(rng)),
                2 => ElementKind::Output {
                    param: param(rng),
                    attr: rng.gen::<bool>().then(|| name(rng, "qa", 0)),
                },
                3 => ElementKind::Input {
                    param: param(rng),
                    attr: name(rng, "qa", 0),
                },
                _ => ElementKind::Table {
                    param: param(rng),
                    selectable: rng.gen(),
                    columns: (0..rng.gen_range(0..3)).map(|i| name(rng, "qa", i)).collect(),
                },
            };
            PageElement { kind, span: span() }
        })
        .collect();
    PageModel {
        name: name(rng, "P", 0),
        params,
        elements,
        file: "gen.page".into(),
    }
}

fn entry(rng: &mut dyn RngCore) -> MenuEntry {
    let target = match rng.gen_range(0..4) {
        0 => EntryRef::Page(name(rng, "P", 0)),
        1 => EntryRef::Activity(name(rng, "F", 0)),
        2 => EntryRef::Class {
            class: name(rng, "Qc", 0),
            mode: ClassPageMode::List,
        },
        _ => EntryRef::Class {
            class: name(rng, "Qc", 0),
            mode: ClassPageMode::Create,
        },
    };
    MenuEntry { target, span: span() }
}

pub fn app(rng: &mut dyn RngCore) -> AppModel {
    let roles: Vec<String> = (0..rng.gen_range(1..4)).map(|i| name(rng, "qrole", i)).collect();
    let menu = (0..rng.gen_range(0..5)).map(|_| entry(rng)).collect();
    let mut rights = Vec::new();
    for role in &roles {
        if rng.gen() {
            rights.push(RightRule {
                role: role.clone(),
                allowed: (0..rng.gen_range(0..4)).map(|_| entry(rng)).collect(),
                span: span(),
            });
        }
    }
    AppModel {
        name: name(rng, "Qapp", 0),
        roles,
        menu,
        rights,
        file: "gen.app".into(),
    }
}
