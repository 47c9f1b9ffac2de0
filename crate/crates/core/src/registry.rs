//! Decentralized specifications: components, labelled monitors and their
//! dependency DAG.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::ehe::{Condition, Trigger};
use crate::ltl::{self, Formula, ParseError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentDecl {
    pub name: String,
    pub aps: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorDecl {
    pub label: String,
    pub component: String,
    pub formula: Formula,
    pub trigger: Trigger,
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Formula {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("monitor {label} uses {prop}, which is neither on component {component} nor a monitor label")]
    ForeignProposition { label: String, prop: String, component: String },
    #[error("duplicate monitor label {0}")]
    DuplicateLabel(String),
    #[error("duplicate component {0}")]
    DuplicateComponent(String),
    #[error("monitor {label} is attached to unknown component {component}")]
    UnknownComponent { label: String, component: String },
    #[error("component {0} has no propositions")]
    EmptyComponent(String),
    #[error("proposition {ap} appears on both {first} and {second}")]
    SharedProposition { ap: String, first: String, second: String },
    #[error("monitor label {0} is also a proposition name")]
    LabelIsProposition(String),
    #[error("trigger of {label} mentions {dep}, which is not one of its dependencies")]
    TriggerLabel { label: String, dep: String },
    #[error("unknown monitor {0}")]
    UnknownLabel(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug)]
pub struct Registry {
    components: Vec<ComponentDecl>,
    monitors: Vec<MonitorDecl>,
    index: HashMap<String, usize>,
    ap_owner: HashMap<String, usize>,
    deps: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
    topo: Vec<usize>,
    depth: Vec<u32>,
    bounded: Vec<bool>,
}

impl Registry {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RegistryError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut components = Vec::new();
        let mut monitors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = keyword(body, "component") {
                components.push(parse_component(rest, line)?);
            } else if let Some(rest) = keyword(body, "monitor") {
                monitors.push(parse_monitor(rest, line)?);
            } else {
                return Err(syntax(line, "expected `component` or `monitor`"));
            }
        }
        Self::new(components, monitors)
    }

    /// Validates the declarations and builds the DAG. Formula identifiers
    /// that name a monitor become references.
    pub fn new(components: Vec<ComponentDecl>, monitors: Vec<MonitorDecl>) -> Result<Self, RegistryError> {
        let mut comp_index = HashMap::new();
        let mut ap_owner: HashMap<String, usize> = HashMap::new();
        for (ci, c) in components.iter().enumerate() {
            if comp_index.insert(c.name.clone(), ci).is_some() {
                return Err(RegistryError::DuplicateComponent(c.name.clone()));
            }
            if c.aps.is_empty() {
                return Err(RegistryError::EmptyComponent(c.name.clone()));
            }
            for ap in &c.aps {
                if let Some(&prev) = ap_owner.get(ap) {
                    return Err(RegistryError::SharedProposition {
                        ap: ap.clone(),
                        first: components[prev].name.clone(),
                        second: c.name.clone(),
                    });
                }
                ap_owner.insert(ap.clone(), ci);
            }
        }
        let mut index = HashMap::new();
        for (mi, m) in monitors.iter().enumerate() {
            if index.insert(m.label.clone(), mi).is_some() {
                return Err(RegistryError::DuplicateLabel(m.label.clone()));
            }
            if ap_owner.contains_key(&m.label) {
                return Err(RegistryError::LabelIsProposition(m.label.clone()));
            }
        }
        let mut monitors = monitors;
        let mut deps = Vec::with_capacity(monitors.len());
        for m in &mut monitors {
            let ci = *comp_index.get(&m.component).ok_or_else(|| RegistryError::UnknownComponent {
                label: m.label.clone(),
                component: m.component.clone(),
            })?;
            let mut bad = None;
            m.formula = m.formula.map_leaves(&mut |leaf| match leaf {
                Formula::Prop(n) | Formula::Ref(n) if index.contains_key(n) => Formula::Ref(n.clone()),
                Formula::Prop(n) | Formula::Ref(n) => {
                    if ap_owner.get(n) != Some(&ci) && bad.is_none() {
                        bad = Some(n.clone());
                    }
                    Formula::Prop(n.clone())
                }
                other => other.clone(),
            });
            if let Some(prop) = bad {
                return Err(RegistryError::ForeignProposition {
                    label: m.label.clone(),
                    prop,
                    component: m.component.clone(),
                });
            }
            let refs = m.formula.references();
            if let Trigger::On(cond) = &m.trigger {
                if let Some(dep) = cond.labels().into_iter().find(|d| !refs.contains(d)) {
                    return Err(RegistryError::TriggerLabel { label: m.label.clone(), dep });
                }
            }
            deps.push(refs.iter().map(|r| index[r]).collect::<Vec<_>>());
        }
        let topo = topological(&monitors, &deps)?;
        let n = monitors.len();
        let mut depth = vec![0u32; n];
        let mut bounded = vec![false; n];
        let mut dependents = vec![Vec::new(); n];
        for &m in &topo {
            depth[m] = deps[m].iter().map(|&d| depth[d] + 1).max().unwrap_or(0);
            bounded[m] = monitors[m].formula.is_bounded() && deps[m].iter().all(|&d| bounded[d]);
            for &d in &deps[m] {
                dependents[d].push(m);
            }
        }
        Ok(Registry { components, monitors, index, ap_owner, deps, dependents, topo, depth, bounded })
    }

    pub fn components(&self) -> &[ComponentDecl] {
        &self.components
    }

    pub fn monitors(&self) -> &[MonitorDecl] {
        &self.monitors
    }

    pub fn len(&self) -> usize {
        self.monitors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monitors.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn monitor(&self, label: &str) -> Option<&MonitorDecl> {
        self.index_of(label).map(|i| &self.monitors[i])
    }

    fn require(&self, label: &str) -> Result<usize, RegistryError> {
        self.index_of(label).ok_or_else(|| RegistryError::UnknownLabel(label.to_string()))
    }

    /// Monitor indices, dependencies before dependents.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn dependencies(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    pub fn dependents(&self, i: usize) -> &[usize] {
        &self.dependents[i]
    }

    pub fn depth(&self, label: &str) -> Result<u32, RegistryError> {
        Ok(self.depth[self.require(label)?])
    }

    pub fn depth_of(&self, i: usize) -> u32 {
        self.depth[i]
    }

    /// Whether the fully inlined formula of monitor `i` is free of G, F and U.
    pub fn is_bounded(&self, i: usize) -> bool {
        self.bounded[i]
    }

    /// Component owning a proposition.
    pub fn owner(&self, ap: &str) -> Option<&ComponentDecl> {
        self.ap_owner.get(ap).map(|&c| &self.components[c])
    }

    /// All propositions over all components, sorted.
    pub fn propositions(&self) -> BTreeSet<String> {
        self.ap_owner.keys().cloned().collect()
    }

    /// `(decentralized, centralized)` proposition counts.
    pub fn ap_counts(&self, label: &str) -> Result<(usize, usize), RegistryError> {
        let i = self.require(label)?;
        let d = self.monitors[i].formula.propositions().len();
        let c = self.inline(label)?.propositions().len();
        Ok((d, c))
    }

    /// Replaces every reference by the referenced monitor's inlined formula.
    pub fn inline(&self, label: &str) -> Result<Formula, RegistryError> {
        let target = self.require(label)?;
        let mut done: HashMap<usize, Formula> = HashMap::new();
        for &m in &self.topo {
            let f = self.monitors[m].formula.map_leaves(&mut |leaf| match leaf {
                Formula::Ref(r) => done[&self.index[r]].clone(),
                other => other.clone(),
            });
            let stop = m == target;
            done.insert(m, f);
            if stop {
                break;
            }
        }
        Ok(done.remove(&target).expect("target visited"))
    }

    /// Sub-registry with `labels` and everything they depend on.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Registry, RegistryError> {
        let mut keep = BTreeSet::new();
        let mut stack = Vec::new();
        for l in labels {
            stack.push(self.require(l.as_ref())?);
        }
        while let Some(m) = stack.pop() {
            if keep.insert(m) {
                stack.extend(self.deps[m].iter().copied());
            }
        }
        let monitors = keep.iter().map(|&m| self.monitors[m].clone()).collect();
        Registry::new(self.components.clone(), monitors)
    }

    /// Verdict messages per round at steady state: every edge whose
    /// dependency has a bounded inlined formula carries one verdict per
    /// timestamp.
    pub fn steady_state_message_rate(&self) -> usize {
        self.deps.iter().flatten().filter(|&&d| self.bounded[d]).count()
    }

    /// Serializes back into the spec-file syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.components {
            let _ = writeln!(s, "component {} {{ {} }}", c.name, c.aps.join(", "));
        }
        for m in &self.monitors {
            let _ = write!(s, "monitor {} @ {} := {}", m.label, m.component, m.formula);
            match &m.trigger {
                Trigger::Eager => {}
                Trigger::Wildcard => s.push_str(" trigger wildcard"),
                Trigger::On(c) => {
                    let _ = write!(s, " trigger {{ {c} }}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// Table-1 style rows: label, |AP|^d, |AP|^c, depth.
    pub fn table(&self) -> Vec<(String, usize, usize, u32)> {
        self.monitors
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (d, c) = self.ap_counts(&m.label).expect("registered");
                (m.label.clone(), d, c, self.depth[i])
            })
            .collect()
    }
}

fn topological(monitors: &[MonitorDecl], deps: &[Vec<usize>]) -> Result<Vec<usize>, RegistryError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = monitors.len();
    let mut mark = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if mark[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = 1;
        while let Some(top) = stack.last_mut() {
            let (v, k) = *top;
            if k < deps[v].len() {
                top.1 += 1;
                let w = deps[v][k];
                match mark[w] {
                    0 => {
                        mark[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => {
                        let from = stack.iter().position(|&(x, _)| x == w).expect("on stack");
                        let mut cycle: Vec<String> =
                            stack[from..].iter().map(|&(x, _)| monitors[x].label.clone()).collect();
                        cycle.push(monitors[w].label.clone());
                        return Err(RegistryError::Cycle(cycle));
                    }
                    _ => {}
                }
            } else {
                mark[v] = 2;
                order.push(v);
                stack.pop();
            }
        }
    }
    Ok(order)
}

fn syntax(line: usize, message: impl Into<String>) -> RegistryError {
    RegistryError::Syntax { line, message: message.into() }
}

fn keyword<'a>(s: &'a str, kw: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(kw)?;
    (rest.is_empty() || rest.starts_with(char::is_whitespace)).then(|| rest.trim_start())
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_component(rest: &str, line: usize) -> Result<ComponentDecl, RegistryError> {
    let (name, body) = rest.split_once('{').ok_or_else(|| syntax(line, "expected `{`"))?;
    let body = body.trim_end().strip_suffix('}').ok_or_else(|| syntax(line, "expected `}`"))?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(syntax(line, format!("invalid component name `{name}`")));
    }
    let mut aps = Vec::new();
    for ap in body.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        if !is_ident(ap) {
            return Err(syntax(line, format!("invalid proposition `{ap}`")));
        }
        aps.push(ap.to_string());
    }
    Ok(ComponentDecl { name: name.to_string(), aps })
}

fn parse_monitor(rest: &str, line: usize) -> Result<MonitorDecl, RegistryError> {
    let (head, body) = rest.split_once(":=").ok_or_else(|| syntax(line, "expected `:=`"))?;
    let (label, component) = head.split_once('@').ok_or_else(|| syntax(line, "expected `@ <component>`"))?;
    let (label, component) = (label.trim(), component.trim());
    if !is_ident(label) || !is_ident(component) {
        return Err(syntax(line, "invalid label or component name"));
    }
    let (formula_text, trigger) = match find_word(body, "trigger") {
        Some(at) => (&body[..at], parse_trigger(body[at + "trigger".len()..].trim(), line)?),
        None => (body, Trigger::Eager),
    };
    let offset = raw_offset(rest, formula_text);
    let formula = ltl::parse(formula_text).map_err(|mut e| {
        e.column += offset;
        RegistryError::Formula { line, source: e }
    })?;
    Ok(MonitorDecl { label: label.to_string(), component: component.to_string(), formula, trigger })
}

fn raw_offset(outer: &str, inner: &str) -> usize {
    // column shift of the formula inside the `monitor` line
    "monitor ".len() + (inner.as_ptr() as usize - outer.as_ptr() as usize)
}

fn find_word(s: &str, w: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let is_id = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let mut from = 0;
    while let Some(p) = s[from..].find(w) {
        let at = from + p;
        let before = at == 0 || !is_id(bytes[at - 1]);
        let after = at + w.len() >= bytes.len() || !is_id(bytes[at + w.len()]);
        if before && after {
            return Some(at);
        }
        from = at + w.len();
    }
    None
}

fn parse_trigger(s: &str, line: usize) -> Result<Trigger, RegistryError> {
    if s == "wildcard" {
        return Ok(Trigger::Wildcard);
    }
    let inner = s
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| syntax(line, "expected `trigger { <cond> }` or `trigger wildcard`"))?;
    parse_condition(inner).map(Trigger::On).map_err(|m| syntax(line, m))
}

/// Parses `T(x)`, `F(x)`, `&`, `|` and parentheses; `&` binds tighter.
pub fn parse_condition(s: &str) -> Result<Condition, String> {
    let tokens = cond_tokens(s)?;
    let mut pos = 0;
    let c = cond_or(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(format!("unexpected `{}` in trigger", tokens[pos]));
    }
    Ok(c)
}

fn cond_tokens(s: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if "()&|".contains(c) {
            out.push(c.to_string());
            chars.next();
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let mut id = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    id.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(id);
        } else {
            return Err(format!("unexpected character `{c}` in trigger"));
        }
    }
    Ok(out)
}

fn cond_or(t: &[String], pos: &mut usize) -> Result<Condition, String> {
    let mut c = cond_and(t, pos)?;
    while t.get(*pos).map(String::as_str) == Some("|") {
        *pos += 1;
        c = Condition::or(c, cond_and(t, pos)?);
    }
    Ok(c)
}

fn cond_and(t: &[String], pos: &mut usize) -> Result<Condition, String> {
    let mut c = cond_atom(t, pos)?;
    while t.get(*pos).map(String::as_str) == Some("&") {
        *pos += 1;
        c = Condition::and(c, cond_atom(t, pos)?);
    }
    Ok(c)
}

fn cond_atom(t: &[String], pos: &mut usize) -> Result<Condition, String> {
    let tok = t.get(*pos).ok_or("trigger ends early")?.clone();
    *pos += 1;
    let expect = |pos: &mut usize, s: &str| -> Result<(), String> {
        if t.get(*pos).map(String::as_str) == Some(s) {
            *pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{s}` in trigger"))
        }
    };
    match tok.as_str() {
        "(" => {
            let c = cond_or(t, pos)?;
            expect(pos, ")")?;
            Ok(c)
        }
        "T" | "F" => {
            expect(pos, "(")?;
            let label = t.get(*pos).filter(|l| is_ident(l)).ok_or("expected a label in trigger")?.clone();
            *pos += 1;
            expect(pos, ")")?;
            Ok(Condition::lit(label, tok == "T"))
        }
        other => Err(format!("unexpected `{other}` in trigger")),
    }
}

/// Labels grouped by depth, for reports.
pub fn by_depth(reg: &Registry) -> BTreeMap<u32, Vec<String>> {
    let mut out: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for (i, m) in reg.monitors.iter().enumerate() {
        out.entry(reg.depth[i]).or_default().push(m.label.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = "\
component lamp { l }
component switch { s }
monitor light @ lamp := l
monitor sc_light @ switch := G(s -> X(light U !s))
";

    #[test]
    fn loads_the_light_pair() {
        let r = Registry::parse(PAIR).unwrap();
        assert_eq!(r.depth("light").unwrap(), 0);
        assert_eq!(r.depth("sc_light").unwrap(), 1);
        assert_eq!(r.ap_counts("sc_light").unwrap(), (2, 2));
        assert_eq!(r.monitor("sc_light").unwrap().formula.references(), BTreeSet::from(["light".to_string()]));
        assert_eq!(r.inline("sc_light").unwrap(), ltl::parse("G(s -> X(l U !s))").unwrap());
        assert_eq!(r.steady_state_message_rate(), 1);
        assert_eq!(r.dependents(0), &[1]);
    }

    #[test]
    fn text_round_trip() {
        let r = Registry::parse(PAIR).unwrap();
        let again = Registry::parse(&r.to_text()).unwrap();
        assert_eq!(again.monitors(), r.monitors());
        assert_eq!(again.components(), r.components());
    }

    #[test]
    fn cycles_are_reported() {
        let text = "component c { p }\nmonitor m1 @ c := m2\nmonitor m2 @ c := m1 & p\n";
        match Registry::parse(text) {
            Err(RegistryError::Cycle(c)) => assert_eq!(c, ["m1", "m2", "m1"]),
            other => panic!("{other:?}"),
        }
        let selfref = "component c { p }\nmonitor m @ c := X m\n";
        assert_eq!(Registry::parse(selfref).unwrap_err(), RegistryError::Cycle(vec!["m".into(), "m".into()]));
    }

    #[test]
    fn validation_errors() {
        let cases = [
            ("component c { p }\ncomponent d { q }\nmonitor m @ c := p & q\n", "uses q"),
            ("component c { p }\nmonitor m @ c := p\nmonitor m @ c := p\n", "duplicate monitor"),
            ("component c { p }\nmonitor m @ z := p\n", "unknown component"),
            ("component c { }\n", "no propositions"),
            ("component c { p }\ncomponent d { p }\n", "both c and d"),
            ("component c { p }\nmonitor p @ c := true\n", "also a proposition"),
            ("component c { p }\nmonitor a @ c := p\nmonitor b @ c := a trigger { T(x) }\n", "mentions x"),
            ("component c { p }\nmonitor m @ c := p U\n", "line 2"),
            ("monitr m @ c := p\n", "line 1"),
        ];
        for (text, needle) in cases {
            let e = Registry::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{e:?} lacks {needle:?}");
        }
    }

    #[test]
    fn triggers_parse() {
        let text = "component c { p }\nmonitor a @ c := G !p\nmonitor b @ c := G !p\n\
                    monitor x @ c := a & b trigger { F(a) | F(b) }\nmonitor y @ c := a trigger wildcard\n";
        let r = Registry::parse(text).unwrap();
        let want = Condition::or(Condition::lit("a", false), Condition::lit("b", false));
        assert_eq!(r.monitor("x").unwrap().trigger, Trigger::On(want));
        assert_eq!(r.monitor("y").unwrap().trigger, Trigger::Wildcard);
        assert_eq!(r.monitor("a").unwrap().trigger, Trigger::Eager);
        assert_eq!(parse_condition("T(a) & (F(b) | T(c))").unwrap().to_string(), "(T(a) & (F(b) | T(c)))");
        assert!(parse_condition("T(a) &").is_err());
        // unbounded dependencies carry no steady-state traffic
        assert_eq!(r.steady_state_message_rate(), 0);
    }

    #[test]
    fn formula_error_columns_point_into_the_line() {
        let e = Registry::parse("component c { p }\nmonitor m @ c := p & )\n").unwrap_err();
        match e {
            RegistryError::Formula { line, source } => {
                assert_eq!(line, 2);
                assert_eq!(source.column, 22);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn restrict_keeps_dependencies() {
        let text = "component c { p, q }\nmonitor a @ c := p\nmonitor b @ c := X a\nmonitor z @ c := q\n";
        let r = Registry::parse(text).unwrap();
        let sub = r.restrict(&["b"]).unwrap();
        assert_eq!(sub.len(), 2);
        assert!(sub.monitor("z").is_none());
        assert_eq!(by_depth(&sub)[&1], vec!["b".to_string()]);
        assert!(r.restrict(&["nope"]).is_err());
    }

    #[test]
    fn inline_is_a_fold() {
        let text = "component c { p, q }\nmonitor a @ c := p | q\nmonitor b @ c := X a & a\nmonitor d @ c := b U a\n";
        let r = Registry::parse(text).unwrap();
        let once = r.inline("d").unwrap();
        assert!(once.references().is_empty());
        assert_eq!(once, ltl::parse("(X(p | q) & (p | q)) U (p | q)").unwrap());
        assert_eq!(r.ap_counts("d").unwrap(), (2, 2));
        assert!(!r.is_bounded(2));
        assert!(r.is_bounded(1));
    }
}
