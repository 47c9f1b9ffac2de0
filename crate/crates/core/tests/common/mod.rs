//! Random decentralized scenarios shared by the integration tests.
#![allow(dead_code)]

use decrv_core::ehe::{Condition, Trigger};
use decrv_core::ltl::Formula;
use decrv_core::registry::{ComponentDecl, MonitorDecl, Registry};
use decrv_core::sim::DeliveryPolicy;
use decrv_core::trace::ObservationTrace;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Scenario {
    pub registry: Registry,
    pub trace: ObservationTrace,
    pub delivery: DeliveryPolicy,
}

#[derive(Clone, Copy)]
pub struct Shape {
    /// Highest dependency layer; leaves are layer 0.
    pub max_depth: u32,
    pub max_props: usize,
    pub max_len: usize,
    /// Allow G, F and U.
    pub unbounded: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_depth: 3, max_props: 6, max_len: 30, unbounded: true }
    }
}

fn leaf(rng: &mut ChaCha8Rng, pool: &[String]) -> Formula {
    if rng.gen_ratio(1, 12) {
        return Formula::Const(rng.gen());
    }
    Formula::prop(pool.choose(rng).unwrap().clone())
}

/// Random formula over `pool` with at most `depth` operator levels.
pub fn formula(rng: &mut ChaCha8Rng, pool: &[String], depth: u32, unbounded: bool) -> Formula {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return leaf(rng, pool);
    }
    let sub = |rng: &mut ChaCha8Rng| formula(rng, pool, depth - 1, unbounded);
    let ops = if unbounded { 10 } else { 7 };
    match rng.gen_range(0..ops) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::next(sub(rng)),
        5 => Formula::finally_within(rng.gen_range(0..=3), sub(rng)),
        6 => Formula::globally_within(rng.gen_range(0..=3), sub(rng)),
        7 => Formula::globally(sub(rng)),
        8 => Formula::finally(sub(rng)),
        _ => Formula::until(sub(rng), sub(rng)),
    }
}

fn trigger(rng: &mut ChaCha8Rng, refs: &[String]) -> Trigger {
    match rng.gen_range(0..4) {
        0 => Trigger::Eager,
        1 => Trigger::Wildcard,
        2 => Trigger::On(Condition::any_message(refs).unwrap()),
        _ => {
            let lits: Vec<Condition> =
                refs.iter().map(|r| Condition::lit(r.clone(), rng.gen())).collect();
            Trigger::On(lits.into_iter().reduce(|a, b| if rng.gen() { Condition::or(a, b) } else { Condition::and(a, b) }).unwrap())
        }
    }
}

pub fn scenario(rng: &mut ChaCha8Rng, shape: Shape) -> Scenario {
    let mut components = Vec::new();
    let mut props = 0;
    let n_comp = rng.gen_range(1..=3);
    for c in 0..n_comp {
        let left = shape.max_props - props - (n_comp - c - 1);
        let k = rng.gen_range(1..=left.clamp(1, 2));
        let aps: Vec<String> = (props..props + k).map(|i| format!("p{i}")).collect();
        props += k;
        components.push(ComponentDecl { name: format!("c{c}"), aps });
    }
    let depth = rng.gen_range(0..=shape.max_depth);
    let mut monitors: Vec<MonitorDecl> = Vec::new();
    let mut layers: Vec<Vec<String>> = Vec::new();
    for layer in 0..=depth {
        let count = rng.gen_range(1..=if layer == 0 { 3 } else { 2 });
        let mut names = Vec::new();
        for k in 0..count {
            let label = format!("m{layer}_{k}");
            let comp = components.choose(rng).unwrap().clone();
            let (formula, trig) = if layer == 0 {
                (formula(rng, &comp.aps, 2, shape.unbounded), Trigger::Eager)
            } else {
                let below: Vec<String> = layers.iter().flatten().cloned().collect();
                let mut pool: Vec<String> = vec![layers[layer as usize - 1].choose(rng).unwrap().clone()];
                if let Some(extra) = below.choose(rng) {
                    if !pool.contains(extra) {
                        pool.push(extra.clone());
                    }
                }
                let ref_only = rng.gen_bool(0.6);
                let mut atoms = pool.clone();
                if !ref_only {
                    atoms.push(comp.aps.choose(rng).unwrap().clone());
                }
                // make sure the required lower-layer reference survives
                let f = Formula::and(formula(rng, &atoms, 1, shape.unbounded), Formula::prop(pool[0].clone()));
                let f = if rng.gen() { f } else { Formula::or(formula(rng, &atoms, 1, shape.unbounded), Formula::prop(pool[0].clone())) };
                let used: Vec<String> = f.propositions().into_iter().filter(|p| pool.contains(p)).collect();
                (f, trigger(rng, &used))
            };
            monitors.push(MonitorDecl { label: label.clone(), component: comp.name.clone(), formula, trigger: trig });
            names.push(label);
        }
        layers.push(names);
    }
    let registry = Registry::new(components.clone(), monitors).expect("generated spec is valid");
    let names: Vec<String> = components.iter().flat_map(|c| c.aps.clone()).collect();
    let len = rng.gen_range(1..=shape.max_len);
    let mut trace = ObservationTrace::new(names.clone());
    for _ in 0..len {
        trace.push((0..names.len()).map(|_| rng.gen_bool(0.5)).collect());
    }
    let delivery = match rng.gen_range(0..3) {
        0 => DeliveryPolicy::Immediate,
        1 => DeliveryPolicy::FixedDelay(rng.gen_range(1..=3)),
        _ => DeliveryPolicy::Reorder { max_delay: rng.gen_range(1..=4), seed: rng.gen() },
    };
    Scenario { registry, trace, delivery }
}

/// All-false trace over every proposition of `reg`.
pub fn quiescent(reg: &Registry, len: usize) -> ObservationTrace {
    let names: Vec<String> = reg.propositions().into_iter().collect();
    let mut t = ObservationTrace::new(names.clone());
    for _ in 0..len {
        t.push(vec![false; names.len()]);
    }
    t
}
