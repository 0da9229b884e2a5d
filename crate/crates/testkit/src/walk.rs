//! Random acyclic activities written directly as source text, together with
//! a reference walker that predicts the trace the engine must produce.
//!
//! The walker never consults the engine or the parser: guards are kept in a
//! private form, rendered to text for the model and evaluated here.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use wisflow_core::engine::{ChoiceScript, ChoiceStep, Engine, EngineError};
use wisflow_core::project::load_sources;
use wisflow_core::store::Store;
use wisflow_core::value::PrimValue;

/// The class model every generated activity is linked against.
pub const CLASSES: &str = "classdiagram Walk {
    class Person <<user>> { login: String; password: String; }
    class Item { label: String; }
}
";

pub const APP: &str = "app Walk { roles member; }\n";

pub const PAGE_NAME: &str = "Step";
pub const PAGE_FILE: &str = "Step.page";
pub const PAGE: &str = "page Step() { text \"next\"; }\n";

pub const ACTIVITY_NAME: &str = "Flow";

/// Guard expressions. `UserSet(b)` is `qu != null` (`b`) or `qu == null`.
#[derive(Debug, Clone)]
pub enum G {
    Lit(bool),
    IntEq(i64, i64, bool),
    StrEq(String, String, bool),
    UserSet(bool),
    Not(Box<G>),
    And(Vec<G>),
    Or(Vec<G>),
}

impl G {
    /// `user_known` is true where `qu` holds the acting user.
    pub fn eval(&self, user_known: bool) -> bool {
        match self {
            G::Lit(b) => *b,
            G::IntEq(a, b, eq) => (a == b) == *eq,
            G::StrEq(a, b, eq) => (a == b) == *eq,
            G::UserSet(set) => user_known == *set,
            G::Not(g) => !g.eval(user_known),
            G::And(gs) => gs.iter().all(|g| g.eval(user_known)),
            G::Or(gs) => gs.iter().any(|g| g.eval(user_known)),
        }
    }

    fn render(&self, out: &mut String) {
        let op = |eq: bool| if eq { "==" } else { "!=" };
        match self {
            G::Lit(b) => out.push_str(if *b { "true" } else { "false" }),
            G::IntEq(a, b, eq) => {
                let _ = write!(out, "{a} {} {b}", op(*eq));
            }
            G::StrEq(a, b, eq) => {
                let _ = write!(out, "\"{a}\" {} \"{b}\"", op(*eq));
            }
            G::UserSet(set) => {
                let _ = write!(out, "qu {} null", op(!*set));
            }
            G::Not(g) => {
                out.push_str("!(");
                g.render(out);
                out.push(')');
            }
            G::And(gs) | G::Or(gs) => {
                let sep = if matches!(self, G::And(_)) { " && " } else { " || " };
                out.push('(');
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(sep);
                    }
                    g.render(out);
                }
                out.push(')');
            }
        }
    }

    fn random(rng: &mut impl Rng, with_user: bool, depth: u32) -> G {
        if depth == 0 || rng.gen_bool(0.45) {
            return match rng.gen_range(0..4) {
                0 => G::Lit(rng.gen()),
                1 => G::IntEq(rng.gen_range(-2..3), rng.gen_range(-2..3), rng.gen()),
                2 => {
                    let s = |rng: &mut dyn rand::RngCore| ["a", "b", "ab"].choose(rng).unwrap().to_string();
                    G::StrEq(s(rng), s(rng), rng.gen())
                }
                _ if with_user => G::UserSet(rng.gen()),
                _ => G::Lit(rng.gen()),
            };
        }
        let n = rng.gen_range(2..4);
        match rng.gen_range(0..3) {
            0 => G::Not(Box::new(G::random(rng, with_user, depth - 1))),
            1 => G::And((0..n).map(|_| G::random(rng, with_user, depth - 1)).collect()),
            _ => G::Or((0..n).map(|_| G::random(rng, with_user, depth - 1)).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Alt {
    /// Index of the target action, `None` for `final`.
    pub target: Option<usize>,
    pub guard: Option<G>,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub interactive: bool,
    pub alts: Vec<Alt>,
}

/// An activity over actions `A0..An`; `initial` leads to `A0` and every
/// edge points forward, so the graph is acyclic.
#[derive(Debug, Clone)]
pub struct WalkModel {
    pub nodes: Vec<Node>,
}

pub fn action_name(i: usize) -> String {
    format!("A{i}")
}

fn label(target: Option<usize>) -> String {
    target.map(action_name).unwrap_or_else(|| "final".into())
}

impl WalkModel {
    /// At most `max_actions` actions and `max_decisions` decision edges.
    pub fn random(rng: &mut impl Rng, max_actions: usize, max_decisions: usize) -> WalkModel {
        let n = rng.gen_range(1..=max_actions);
        let mut decisions = 0;
        let nodes = (0..n)
            .map(|i| {
                let interactive = rng.gen_bool(0.6);
                let mut forward: Vec<Option<usize>> = (i + 1..n).map(Some).chain([None]).collect();
                forward.shuffle(rng);
                let width = if decisions < max_decisions && forward.len() > 1 && rng.gen_bool(0.5) {
                    decisions += 1;
                    rng.gen_range(2..=forward.len().min(3))
                } else {
                    1
                };
                let mut alts: Vec<Alt> = forward[..width]
                    .iter()
                    .map(|&target| Alt { target, guard: None })
                    .collect();
                if width > 1 {
                    // automatic decisions must guard every alternative
                    for alt in &mut alts {
                        if !interactive || rng.gen_bool(0.4) {
                            alt.guard = Some(G::random(rng, !interactive, 3));
                        }
                    }
                    if interactive && alts.iter().all(|a| a.guard.is_some()) {
                        alts[0].guard = None;
                    }
                }
                Node { interactive, alts }
            })
            .collect();
        WalkModel { nodes }
    }

    pub fn activity_source(&self) -> String {
        let mut s = format!("activity {ACTIVITY_NAME} {{\n");
        let interactive: Vec<String> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].interactive)
            .map(action_name)
            .collect();
        if !interactive.is_empty() {
            let _ = writeln!(s, "    role R {{ {} }}", interactive.join(", "));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "    action {} {{", action_name(i));
            if node.interactive {
                let _ = writeln!(s, "        view : {PAGE_NAME}();");
            } else {
                s.push_str("        var : Person qu;\n        cmd : qu = getActualUser();\n");
            }
            s.push_str("    }\n");
        }
        s.push_str("    initial -> A0;\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let _ = write!(s, "    {} -> ", action_name(i));
            for (k, alt) in node.alts.iter().enumerate() {
                if k > 0 {
                    s.push_str(" | ");
                }
                if let Some(g) = &alt.guard {
                    s.push('[');
                    g.render(&mut s);
                    s.push_str("] ");
                }
                s.push_str(&label(alt.target));
            }
            s.push_str(";\n");
        }
        s.push_str("}\n");
        s
    }

    /// Actions reachable from `initial` along any alternative.
    pub fn reachable(&self) -> std::collections::BTreeSet<String> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            queue.extend(self.nodes[i].alts.iter().filter_map(|a| a.target));
        }
        (0..self.nodes.len()).filter(|&i| seen[i]).map(action_name).collect()
    }

    /// All model files of a project holding this activity.
    pub fn project_files(&self) -> Vec<(String, String)> {
        vec![
            ("walk.cd".into(), CLASSES.into()),
            ("walk.app".into(), APP.into()),
            (PAGE_FILE.into(), PAGE.into()),
            ("Flow.act".into(), self.activity_source()),
        ]
    }
}

/// What the engine must report for one scripted run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Finished,
    /// An automatic decision where no guard held: the engine must refuse
    /// rather than pick an alternative.
    MissingDecision,
}

#[derive(Debug, Clone)]
pub struct Walk {
    /// The decision submitted at each interactive action, in order.
    pub decisions: Vec<Option<String>>,
    /// Every action entered, automatic ones included.
    pub trace: Vec<String>,
    pub outcome: Outcome,
}

/// Walks `model` from `initial`, drawing a random answer wherever a person
/// has to decide.
pub fn walk(model: &WalkModel, rng: &mut impl Rng) -> Walk {
    let mut walks = all_walks(model);
    let i = rng.gen_range(0..walks.len());
    walks.swap_remove(i)
}

/// One walk per combination of answers at the decisions people make.
pub fn all_walks(model: &WalkModel) -> Vec<Walk> {
    let mut out = Vec::new();
    let start = Walk {
        decisions: Vec::new(),
        trace: Vec::new(),
        outcome: Outcome::Finished,
    };
    explore(model, Some(0), start, &mut out);
    out
}

fn explore(model: &WalkModel, mut at: Option<usize>, mut walk: Walk, out: &mut Vec<Walk>) {
    while let Some(i) = at {
        walk.trace.push(action_name(i));
        let node = &model.nodes[i];
        let holds = |a: &&Alt| a.guard.as_ref().is_some_and(|g| g.eval(!node.interactive));
        if node.alts.len() == 1 {
            at = node.alts[0].target;
        } else if let Some(alt) = node.alts.iter().find(holds) {
            at = alt.target;
        } else {
            let open: Vec<&Alt> = node.alts.iter().filter(|a| a.guard.is_none()).collect();
            if !node.interactive || open.is_empty() {
                walk.outcome = Outcome::MissingDecision;
                out.push(walk);
                return;
            }
            for alt in open {
                let mut branch = walk.clone();
                branch.decisions.push(Some(label(alt.target)));
                explore(model, alt.target, branch, out);
            }
            return;
        }
        if node.interactive {
            walk.decisions.push(None);
        }
    }
    out.push(walk);
}

/// Builds an engine for `model` with one user and returns it with the
/// user's id.
pub fn engine_for(model: &WalkModel) -> Result<(Engine, String), String> {
    let system = load_sources("walk", &model.project_files()).map_err(|d| format!("{d:#?}"))?;
    let store = Store::in_memory(system.class_model.clone());
    let fields = BTreeMap::from([
        ("login".to_string(), PrimValue::Str("w".into())),
        ("password".to_string(), PrimValue::Str("w".into())),
    ]);
    let user = store
        .create_object("Person", fields, BTreeMap::new())
        .map_err(|e| e.to_string())?
        .id;
    Ok((Engine::new(system, store), user))
}

/// Simulates every walk of `model` on a fresh engine. Returns how many runs
/// were compared, or a description of the first disagreement.
pub fn compare_with_engine(model: &WalkModel) -> Result<usize, String> {
    let walks = all_walks(model);
    for expected in &walks {
        let (engine, user) = engine_for(model)?;
        let script = ChoiceScript {
            starter: user,
            steps: expected
                .decisions
                .iter()
                .map(|d| ChoiceStep {
                    decision: d.clone(),
                    ..ChoiceStep::default()
                })
                .collect(),
        };
        let got = engine.simulate(ACTIVITY_NAME, &script);
        let agrees = match (&got, &expected.outcome) {
            (Ok(sim), Outcome::Finished) => sim.trace == expected.trace && engine.store().is_finished(&sim.instance_id),
            (Err(EngineError::MissingDecision(_)), Outcome::MissingDecision) => true,
            _ => false,
        };
        if !agrees {
            return Err(format!(
                "engine {got:?}, reference {expected:?}\n{}",
                model.activity_source()
            ));
        }
    }
    Ok(walks.len())
}
