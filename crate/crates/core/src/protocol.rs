//! Protocol sessions, symbolic execution and attack search.
//!
//! A protocol is a set of roles, each an ordered list of receive and send actions. Every
//! channel between two agents is either free or controlled by one intruder. Executing
//! the roles symbolically produces a constraint system: an intruder delivering a message
//! on a channel it controls must be able to derive it from what it has seen, and a
//! message passed over a free channel must equal what the receiver expects. Equality is
//! expressed as `{senc(s, @eqkey)} |> senc(r, @eqkey)` with a key the intruders never know.
//!
//! Spec file format:
//!
//! ```text
//! AGENTS
//!   alice, bob
//! INTRUDERS
//!   eve: k1, n1
//! CHANNELS
//!   alice -> bob controlled_by eve
//!   bob -> alice
//! ROLES
//!   alice:
//!     send to bob: senc(s, X)
//!   bob:
//!     recv from alice: Y
//! SECRETS
//!   s
//! BOUND 6
//! ```
//!
//! Channels not listed are free. `BOUND` caps the number of transitions explored and
//! defaults to the total number of actions.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::constraint::{Constraint, ConstraintSystem};
use crate::deduction::{check_model, derivable, Theory};
use crate::parse::{parse_term, parse_term_list, ParseError};
use crate::solver::{solve, Outcome, SolveError, SolverConfig};
use crate::subst::Substitution;
use crate::term::{normalize, vars, Name, Term};

/// Reserved atom used to encode equalities between messages.
pub const EQ_KEY: &str = "@eqkey";

/// Bundled example scenarios: name, description, spec text.
pub const SCENARIOS: &[(&str, &str, &str)] = &[
    (
        "eshop",
        "online shop whose delivery service misreads the order fields",
        include_str!("../scenarios/eshop.proto"),
    ),
    (
        "split_key",
        "two intruders on different links who only learn the secret together",
        include_str!("../scenarios/split_key.proto"),
    ),
    (
        "sealed",
        "a message sealed with a shared key over an intercepted link",
        include_str!("../scenarios/sealed.proto"),
    ),
];

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|s| s.0 == name).map(|s| s.2)
}

/// `{senc(t1, k)} |> senc(t2, k)`: satisfied exactly when `t1` and `t2` have the same
/// normal form, as long as `k` cannot be derived from `t1`.
pub fn encode_equality(t1: &Term, t2: &Term, k: &Term) -> Constraint {
    Constraint::new(
        [Term::senc(t1.clone(), k.clone())],
        Term::senc(t2.clone(), k.clone()),
    )
}

/// The reserved equality key.
pub fn eq_key() -> Term {
    Term::atom(EQ_KEY)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Recv { from: Name, pattern: Term },
    Send { to: Name, message: Term },
}

impl Action {
    pub fn term(&self) -> &Term {
        match self {
            Action::Recv { pattern, .. } => pattern,
            Action::Send { message, .. } => message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Role {
    pub agent: Name,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Default)]
pub struct Protocol {
    pub agents: Vec<Name>,
    /// Intruders with their initial knowledge.
    pub intruders: BTreeMap<Name, Vec<Term>>,
    /// Controlled channels `(from, to)` and their intruder.
    pub channels: BTreeMap<(Name, Name), Name>,
    pub roles: Vec<Role>,
    pub secrets: Vec<Term>,
    pub bound: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: ParseError },
    #[error("{0}")]
    Invalid(String),
}

impl Protocol {
    pub fn parse(text: &str) -> Result<Protocol, SpecError> {
        let mut p = Protocol::default();
        let mut section = "";
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| SpecError::Syntax {
                line: line_no,
                message,
            };
            let term_err = |source| SpecError::Term {
                line: line_no,
                source,
            };
            if let Some(rest) = line.strip_prefix("BOUND") {
                let b = rest
                    .trim()
                    .parse()
                    .map_err(|_| syntax("BOUND needs a number".into()))?;
                p.bound = Some(b);
                continue;
            }
            if matches!(
                line,
                "AGENTS" | "INTRUDERS" | "CHANNELS" | "ROLES" | "SECRETS"
            ) {
                section = match line {
                    "AGENTS" => "AGENTS",
                    "INTRUDERS" => "INTRUDERS",
                    "CHANNELS" => "CHANNELS",
                    "ROLES" => "ROLES",
                    _ => "SECRETS",
                };
                continue;
            }
            match section {
                "AGENTS" => {
                    for a in line.split(|c: char| c == ',' || c.is_whitespace()) {
                        if !a.is_empty() {
                            p.agents.push(ident(a).map_err(syntax)?);
                        }
                    }
                }
                "INTRUDERS" => {
                    let (name, rest) = line
                        .split_once(':')
                        .ok_or_else(|| syntax("expected `name: knowledge`".into()))?;
                    let knowledge = parse_term_list(rest)
                        .map_err(term_err)?
                        .iter()
                        .map(normalize)
                        .collect();
                    p.intruders
                        .insert(ident(name.trim()).map_err(syntax)?, knowledge);
                }
                "CHANNELS" => {
                    let words: Vec<&str> = line.split_whitespace().collect();
                    let (from, to, ctrl) = match words.as_slice() {
                        [a, "->", b] => (a, b, None),
                        [a, "->", b, "controlled_by", i] => (a, b, Some(i)),
                        _ => return Err(syntax("expected `a -> b [controlled_by i]`".into())),
                    };
                    if let Some(i) = ctrl {
                        p.channels.insert(
                            (ident(from).map_err(syntax)?, ident(to).map_err(syntax)?),
                            ident(i).map_err(syntax)?,
                        );
                    }
                }
                "ROLES" => {
                    if let Some(rest) = line.strip_prefix("recv from ") {
                        let (from, t) = rest
                            .split_once(':')
                            .ok_or_else(|| syntax("expected `recv from a: term`".into()))?;
                        let action = Action::Recv {
                            from: ident(from.trim()).map_err(syntax)?,
                            pattern: parse_term(t).map_err(term_err)?,
                        };
                        p.roles
                            .last_mut()
                            .ok_or_else(|| syntax("action outside a role".into()))?
                            .actions
                            .push(action);
                    } else if let Some(rest) = line.strip_prefix("send to ") {
                        let (to, t) = rest
                            .split_once(':')
                            .ok_or_else(|| syntax("expected `send to a: term`".into()))?;
                        let action = Action::Send {
                            to: ident(to.trim()).map_err(syntax)?,
                            message: parse_term(t).map_err(term_err)?,
                        };
                        p.roles
                            .last_mut()
                            .ok_or_else(|| syntax("action outside a role".into()))?
                            .actions
                            .push(action);
                    } else if let Some(agent) = line.strip_suffix(':') {
                        p.roles.push(Role {
                            agent: ident(agent.trim()).map_err(syntax)?,
                            actions: Vec::new(),
                        });
                    } else {
                        return Err(syntax(format!("cannot read role line `{line}`")));
                    }
                }
                "SECRETS" => p
                    .secrets
                    .push(normalize(&parse_term(line).map_err(term_err)?)),
                _ => return Err(syntax("content before the first section".into())),
            }
        }
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), SpecError> {
        let agents: BTreeSet<&Name> = self.agents.iter().collect();
        let known = |a: &Name, what: &str| {
            if agents.contains(a) {
                Ok(())
            } else {
                Err(SpecError::Invalid(format!(
                    "{what} `{a}` is not a declared agent"
                )))
            }
        };
        for ((from, to), i) in &self.channels {
            known(from, "channel end")?;
            known(to, "channel end")?;
            if !self.intruders.contains_key(i) {
                return Err(SpecError::Invalid(format!("unknown intruder `{i}`")));
            }
        }
        let mut owner: BTreeMap<Name, &Name> = BTreeMap::new();
        for r in &self.roles {
            known(&r.agent, "role")?;
            let mut received = BTreeSet::new();
            for a in &r.actions {
                match a {
                    Action::Recv { from, pattern } => {
                        known(from, "sender")?;
                        received.extend(vars(pattern));
                    }
                    Action::Send { to, message } => {
                        known(to, "receiver")?;
                        if let Some(v) = vars(message).into_iter().find(|v| !received.contains(v)) {
                            return Err(SpecError::Invalid(format!(
                                "role `{}` sends variable `{v}` before receiving it",
                                r.agent
                            )));
                        }
                    }
                }
                for v in vars(a.term()) {
                    if let Some(other) = owner.insert(v.clone(), &r.agent) {
                        if other != &r.agent {
                            return Err(SpecError::Invalid(format!(
                                "variable `{v}` is shared by roles `{other}` and `{}`",
                                r.agent
                            )));
                        }
                    }
                }
            }
        }
        for t in self.intruders.values().flatten().chain(&self.secrets) {
            if !t.is_ground() {
                return Err(SpecError::Invalid(format!("`{t}` must be ground")));
            }
        }
        Ok(())
    }

    pub fn action_count(&self) -> usize {
        self.roles.iter().map(|r| r.actions.len()).sum()
    }

    fn controller(&self, from: &Name, to: &Name) -> Option<&Name> {
        self.channels.get(&(from.clone(), to.clone()))
    }

    pub fn initial(&self) -> Configuration {
        Configuration {
            progress: vec![0; self.roles.len()],
            knowledge: self
                .intruders
                .iter()
                .map(|(i, k)| (i.clone(), k.iter().cloned().collect()))
                .collect(),
            queues: BTreeMap::new(),
            system: ConstraintSystem::default(),
            trace: Vec::new(),
        }
    }

    /// Every configuration reachable from `c` in one transition.
    pub fn step(&self, c: &Configuration) -> Vec<Configuration> {
        let mut out = Vec::new();
        for (r, role) in self.roles.iter().enumerate() {
            let Some(action) = role.actions.get(c.progress[r]) else {
                continue;
            };
            let mut next = c.clone();
            next.progress[r] += 1;
            let rule = match action {
                Action::Recv { from, pattern } => match self.controller(from, &role.agent) {
                    Some(i) => {
                        let k = c.knowledge[i].iter().cloned();
                        next.system.push(Constraint::new(k, pattern.clone()));
                        Rule::Inject(i.clone())
                    }
                    None => {
                        let key = (from.clone(), role.agent.clone());
                        let Some(sent) = next.queues.get_mut(&key).and_then(VecDeque::pop_front)
                        else {
                            continue;
                        };
                        if next.queues[&key].is_empty() {
                            next.queues.remove(&key);
                        }
                        next.system.push(encode_equality(&sent, pattern, &eq_key()));
                        Rule::Deliver
                    }
                },
                Action::Send { to, message } => match self.controller(&role.agent, to) {
                    Some(i) => {
                        next.knowledge.get_mut(i).unwrap().insert(message.clone());
                        Rule::Intercept(i.clone())
                    }
                    None => {
                        next.queues
                            .entry((role.agent.clone(), to.clone()))
                            .or_default()
                            .push_back(message.clone());
                        Rule::Enqueue
                    }
                },
            };
            next.trace.push(Transition {
                role: r,
                agent: role.agent.clone(),
                action: action.clone(),
                rule,
            });
            out.push(next);
        }
        out
    }

    fn limit(&self) -> usize {
        self.bound.unwrap_or_else(|| self.action_count())
    }

    /// All configurations reachable within the bound, depth first, the initial one
    /// first. Configurations reached again through another interleaving are skipped.
    pub fn reachable(&self) -> Vec<Configuration> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.initial()];
        while let Some(c) = stack.pop() {
            if !seen.insert(c.key()) {
                continue;
            }
            if c.trace.len() < self.limit() {
                let mut next = self.step(&c);
                next.reverse();
                stack.extend(next);
            }
            out.push(c);
        }
        out
    }

    /// Every maximal execution within the bound, one per interleaving.
    pub fn complete_executions(&self) -> Vec<Configuration> {
        let mut out = Vec::new();
        let mut stack = vec![self.initial()];
        while let Some(c) = stack.pop() {
            let next = if c.trace.len() < self.limit() {
                self.step(&c)
            } else {
                Vec::new()
            };
            if next.is_empty() {
                out.push(c);
            } else {
                stack.extend(next.into_iter().rev());
            }
        }
        out
    }

    /// Search for a reachable configuration where the intruders, pooling their
    /// knowledge, derive a secret. Secrets are tried in order, configurations in
    /// [`Protocol::reachable`] order.
    pub fn find_attack(&self, config: &SolverConfig) -> Result<AttackOutcome, SolveError> {
        let configurations = self.reachable();
        let mut undecided = None;
        for secret in &self.secrets {
            for c in &configurations {
                let system = c.attack_system(secret);
                let sol = solve(&system, config)?;
                match sol.outcome {
                    Outcome::Sat(sigma) => {
                        let pooled: Vec<Term> = c
                            .pooled_knowledge()
                            .iter()
                            .map(|t| sigma.apply_normalized(t))
                            .collect::<Result<_, _>>()?;
                        let confirmed = check_model(&system, &sigma, Theory::DyAci)?
                            && derivable(&pooled, secret, Theory::DyAci)?;
                        if !confirmed {
                            return Err(SolveError::Internal(
                                "attack failed re-verification".into(),
                            ));
                        }
                        return Ok(AttackOutcome::Attack(Box::new(AttackReport {
                            secret: secret.clone(),
                            configuration: c.clone(),
                            system,
                            model: sigma,
                        })));
                    }
                    Outcome::Unsat => {}
                    Outcome::Indeterminate(reason) => {
                        undecided.get_or_insert(reason);
                    }
                }
            }
        }
        Ok(match undecided {
            Some(reason) => AttackOutcome::Indeterminate(reason),
            None => AttackOutcome::Safe,
        })
    }
}

fn ident(s: &str) -> Result<Name, String> {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Ok(Name::from(s))
    } else {
        Err(format!("bad name `{s}`"))
    }
}

/// How a transition moved a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// The intruder supplied a message it can derive on a channel it controls.
    Inject(Name),
    /// The intruder recorded a message sent on a channel it controls.
    Intercept(Name),
    /// A message entered the queue of a free channel.
    Enqueue,
    /// A message left the queue of a free channel and matched the expected pattern.
    Deliver,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub role: usize,
    pub agent: Name,
    pub action: Action,
    pub rule: Rule,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Action::Recv { from, pattern } => {
                write!(f, "{} receives {pattern} from {from}", self.agent)?
            }
            Action::Send { to, message } => write!(f, "{} sends {message} to {to}", self.agent)?,
        }
        match &self.rule {
            Rule::Inject(i) => write!(f, " [{i} delivers]"),
            Rule::Intercept(i) => write!(f, " [{i} intercepts]"),
            Rule::Enqueue => write!(f, " [queued]"),
            Rule::Deliver => write!(f, " [dequeued]"),
        }
    }
}

/// A symbolic state: role progress, intruder knowledge, free-channel queues and the
/// constraints accumulated so far.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub progress: Vec<usize>,
    pub knowledge: BTreeMap<Name, BTreeSet<Term>>,
    pub queues: BTreeMap<(Name, Name), VecDeque<Term>>,
    pub system: ConstraintSystem,
    pub trace: Vec<Transition>,
}

type ConfigKey = (
    Vec<usize>,
    BTreeMap<Name, BTreeSet<Term>>,
    BTreeMap<(Name, Name), VecDeque<Term>>,
    BTreeSet<Constraint>,
);

impl Configuration {
    fn key(&self) -> ConfigKey {
        (
            self.progress.clone(),
            self.knowledge.clone(),
            self.queues.clone(),
            self.system.constraints().iter().cloned().collect(),
        )
    }

    /// Union of all intruders' knowledge.
    pub fn pooled_knowledge(&self) -> BTreeSet<Term> {
        self.knowledge.values().flatten().cloned().collect()
    }

    /// The accumulated constraints plus the pooled knowledge deriving `secret`.
    pub fn attack_system(&self, secret: &Term) -> ConstraintSystem {
        let mut s = self.system.clone();
        s.push(Constraint::new(self.pooled_knowledge(), secret.clone()));
        s
    }
}

#[derive(Debug, Clone)]
pub enum AttackOutcome {
    Attack(Box<AttackReport>),
    Safe,
    Indeterminate(String),
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub secret: Term,
    pub configuration: Configuration,
    pub system: ConstraintSystem,
    pub model: Substitution,
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "secret: {}", self.secret)?;
        writeln!(f, "trace:")?;
        for (i, t) in self.configuration.trace.iter().enumerate() {
            let concrete = self
                .model
                .apply_normalized(t.action.term())
                .map_err(|_| fmt::Error)?;
            writeln!(f, "  {}. {t}", i + 1)?;
            writeln!(f, "     with {concrete}")?;
        }
        writeln!(f, "model:")?;
        for (v, t) in self.model.iter() {
            writeln!(f, "  {v} = {t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SENDERS: &str = "\
AGENTS
  a, b, c
CHANNELS
ROLES
  a:
    send to c: m1
    send to c: m2
  b:
    send to c: m3
    send to c: m4
";

    #[test]
    fn interleavings_of_independent_roles() {
        let p = Protocol::parse(TWO_SENDERS).unwrap();
        assert_eq!(p.complete_executions().len(), 6);
        // 3 x 3 progress states, each reached once
        assert_eq!(p.reachable().len(), 9);
    }

    #[test]
    fn single_send_and_zero_bound() {
        let text = "AGENTS\n a, b\nINTRUDERS\n i1:\nCHANNELS\n a -> b controlled_by i1\nROLES\n a:\n  send to b: m\n";
        let mut p = Protocol::parse(text).unwrap();
        let runs = p.complete_executions();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].trace.len(), 1);
        assert!(runs[0].knowledge["i1"].contains(&parse_term("m").unwrap()));
        p.bound = Some(0);
        assert_eq!(p.reachable().len(), 1);
    }

    #[test]
    fn transitions_change_one_thing() {
        let p = Protocol::parse(scenario("eshop").unwrap()).unwrap();
        for c in p.reachable() {
            for n in p.step(&c) {
                let consumed: usize = n.progress.iter().zip(&c.progress).map(|(a, b)| a - b).sum();
                assert_eq!(consumed, 1);
                let grew = n.system.len() - c.system.len();
                let learned = n.pooled_knowledge().len() - c.pooled_knowledge().len();
                let queued = n.queues.values().map(VecDeque::len).sum::<usize>() as isize
                    - c.queues.values().map(VecDeque::len).sum::<usize>() as isize;
                match n.trace.last().unwrap().rule {
                    Rule::Inject(_) => assert_eq!((grew, learned, queued), (1, 0, 0)),
                    Rule::Intercept(_) => assert!(grew == 0 && learned <= 1 && queued == 0),
                    Rule::Enqueue => assert_eq!((grew, learned, queued), (0, 0, 1)),
                    Rule::Deliver => assert_eq!((grew, learned, queued), (1, 0, -1)),
                }
            }
        }
    }

    #[test]
    fn parse_errors() {
        assert!(Protocol::parse("AGENTS\n a\nROLES\n b:\n").is_err());
        assert!(Protocol::parse("AGENTS\n a\nCHANNELS\n a -> a controlled_by z\n").is_err());
        assert!(Protocol::parse("AGENTS\n a\nSECRETS\n X\n").is_err());
        assert!(Protocol::parse("junk\n").is_err());
        let e = Protocol::parse("AGENTS\n a\nROLES\n a:\n  recv from a: pair(\n").unwrap_err();
        assert!(matches!(e, SpecError::Term { line: 5, .. }));
        let unbound = "AGENTS\n a, b\nROLES\n a:\n  send to b: X\n";
        assert!(Protocol::parse(unbound).is_err());
        let shared = "AGENTS\n a, b\nROLES\n a:\n  recv from b: X\n b:\n  recv from a: X\n";
        assert!(Protocol::parse(shared).is_err());
    }

    #[test]
    fn free_channel_produces_equality() {
        let text =
            "AGENTS\n a, b\nROLES\n a:\n  send to b: pair(n, m)\n b:\n  recv from a: pair(X, Y)\n";
        let p = Protocol::parse(text).unwrap();
        let full = p.complete_executions();
        assert_eq!(full.len(), 1);
        let c = &full[0].system.constraints()[0];
        assert_eq!(
            c,
            &encode_equality(
                &parse_term("pair(n, m)").unwrap(),
                &parse_term("pair(X, Y)").unwrap(),
                &eq_key()
            )
        );
    }

    #[test]
    fn secret_known_from_start() {
        let text = "AGENTS\n a\nINTRUDERS\n eve: s\nSECRETS\n s\n";
        let p = Protocol::parse(text).unwrap();
        match p.find_attack(&SolverConfig::default()).unwrap() {
            AttackOutcome::Attack(r) => assert!(r.configuration.trace.is_empty()),
            other => panic!("expected attack, got {other:?}"),
        }
    }

    #[test]
    fn free_channels_only_is_safe() {
        let text = "AGENTS\n a, b\nINTRUDERS\n eve: n\nROLES\n a:\n  send to b: senc(s, k)\n b:\n  recv from a: senc(X, k)\nSECRETS\n s\n";
        let p = Protocol::parse(text).unwrap();
        assert!(matches!(
            p.find_attack(&SolverConfig::default()).unwrap(),
            AttackOutcome::Safe
        ));
    }

    #[test]
    fn scenarios_parse() {
        for (name, _, text) in SCENARIOS {
            assert!(Protocol::parse(text).is_ok(), "{name}");
        }
    }
}
