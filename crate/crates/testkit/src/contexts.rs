//! Random execution contexts for persistence round-trips.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use wisflow_core::store::{ExecutionContext, Notification, Phase, TokenPosition};
use wisflow_core::value::{DomainObject, PrimValue, Value};

fn word(rng: &mut impl Rng) -> String {
    const CHARS: &[char] = &['a', 'Z', '0', ' ', '"', '\\', '\n', 'ü', '.', '-'];
    (0..rng.gen_range(0..8)).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

fn id(rng: &mut impl Rng) -> String {
    (0..5).map(|_| *b"0123456789abcdefghijklmnopqrstuvwxyz".choose(rng).unwrap() as char).collect()
}

pub fn prim(rng: &mut impl Rng) -> PrimValue {
    match rng.gen_range(0..5) {
        0 => PrimValue::Bool(rng.gen()),
        1 => PrimValue::Int(rng.gen()),
        2 => PrimValue::Decimal(rng.gen_range(-1e9..1e9)),
        3 => PrimValue::Decimal(f64::from(rng.gen_range(-50i32..50))),
        _ => PrimValue::Str(word(rng)),
    }
}

pub fn value(rng: &mut impl Rng, depth: u32) -> Value {
    match rng.gen_range(0..if depth == 0 { 3 } else { 4 }) {
        0 => Value::Prim(prim(rng)),
        1 => Value::Ref(id(rng)),
        2 => Value::TempRef(format!("tmp-{}", rng.gen_range(0..100))),
        _ => Value::SetOf((0..rng.gen_range(0..4)).map(|_| value(rng, depth - 1)).collect()),
    }
}

fn object(rng: &mut impl Rng, key: String) -> DomainObject {
    let mut obj = DomainObject::new(format!("C{}", rng.gen_range(0..3)), key);
    for i in 0..rng.gen_range(0..4) {
        obj.fields.insert(format!("f{i}"), prim(rng));
    }
    for i in 0..rng.gen_range(0..3) {
        obj.links.insert(format!("r{i}"), (0..rng.gen_range(0..3)).map(|_| id(rng)).collect());
    }
    obj
}

pub fn context(rng: &mut impl Rng) -> ExecutionContext {
    let token = if rng.gen_bool(0.2) {
        TokenPosition::Completed
    } else {
        TokenPosition::AtAction {
            action: format!("A{}", rng.gen_range(0..9)),
            phase: if rng.gen() { Phase::BeforeView } else { Phase::AwaitingSubmit },
        }
    };
    let bindings: BTreeMap<String, Value> = (0..rng.gen_range(0..6))
        .map(|i| (format!("A{}.v{i}", rng.gen_range(0..3)), value(rng, 2)))
        .collect();
    let role_bindings = (0..rng.gen_range(0..3)).map(|i| (format!("R{i}"), id(rng))).collect();
    let transient_objects = (0..rng.gen_range(0..3))
        .map(|i| {
            let key = format!("tmp-{i}");
            (key.clone(), object(rng, key))
        })
        .collect();
    let notifications = (0..rng.gen_range(0..3))
        .map(|_| Notification {
            user: id(rng),
            message: word(rng),
        })
        .collect();
    ExecutionContext {
        instance_id: id(rng),
        activity_name: format!("F{}", rng.gen_range(0..5)),
        token,
        bindings,
        role_bindings,
        transient_objects,
        started_by: id(rng),
        notifications,
        epoch: rng.gen_range(0..1_000),
        created_seq: rng.gen_range(0..1_000_000),
        next_temp: rng.gen_range(0..100),
    }
}
