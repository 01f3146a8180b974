//! The flat instance file format and the value-function file loader.
//!
//! Instance files are line-oriented and whitespace-separated; `#` starts a
//! comment that runs to the end of the line. Layout:
//!
//! ```text
//! mdp <num_states>
//! initial <s0>
//! goals <g1> <g2> ...
//! state <id> <num_actions>      # once per state, any order
//! action <cost> <k>             # num_actions times per state
//! <succ_id> <prob>              # k outcome lines per action
//! ```
//!
//! Numbers are parsed and written with Rust's shortest round-trip `f64`
//! formatting (at most 17 significant digits), so serialize → parse is
//! bit-exact and repeated generation produces identical bytes.

use std::fmt::Write as _;

use thiserror::Error;
use topomdp::mdp::{Action, Mdp, ModelError, StateId, ValueFn};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation: {0}")]
    Model(#[from] ModelError),
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Parse {
        line,
        message: message.into(),
    })
}

/// Lines stripped of comments, tokenized, with 1-based line numbers.
struct Records<'a> {
    rows: Vec<(usize, Vec<&'a str>)>,
    next: usize,
}

impl<'a> Records<'a> {
    fn new(text: &'a str) -> Self {
        let rows = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let body = raw.split('#').next().unwrap_or("");
                let tokens: Vec<&str> = body.split_whitespace().collect();
                if tokens.is_empty() {
                    None
                } else {
                    Some((i + 1, tokens))
                }
            })
            .collect();
        Records { rows, next: 0 }
    }

    fn take(&mut self) -> Option<&(usize, Vec<&'a str>)> {
        let row = self.rows.get(self.next);
        if row.is_some() {
            self.next += 1;
        }
        row
    }

    fn last_line(&self) -> usize {
        self.rows.last().map_or(0, |(l, _)| *l)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, FormatError> {
    token
        .parse::<T>()
        .or_else(|_| err(line, format!("expected {what}, found `{token}`")))
}

pub fn parse_mdp(text: &str) -> Result<Mdp, FormatError> {
    let mut records = Records::new(text);

    let (line, row) = match records.take() {
        Some(r) => (r.0, r.1.clone()),
        None => return err(0, "empty input"),
    };
    if row.len() != 2 || row[0] != "mdp" {
        return err(line, "expected `mdp <num_states>`");
    }
    let num_states: usize = parse_num(line, row[1], "a state count")?;

    let (line, row) = match records.take() {
        Some(r) => (r.0, r.1.clone()),
        None => return err(line, "missing `initial` line"),
    };
    if row.len() != 2 || row[0] != "initial" {
        return err(line, "expected `initial <state>`");
    }
    let initial: u32 = parse_num(line, row[1], "a state id")?;

    let (line, row) = match records.take() {
        Some(r) => (r.0, r.1.clone()),
        None => return err(line, "missing `goals` line"),
    };
    if row.is_empty() || row[0] != "goals" {
        return err(line, "expected `goals <g1> <g2> ...`");
    }
    let mut goals = Vec::with_capacity(row.len() - 1);
    for tok in &row[1..] {
        goals.push(StateId(parse_num(line, tok, "a goal state id")?));
    }

    let mut actions: Vec<Option<Vec<Action>>> = vec![None; num_states];
    while let Some((line, row)) = records.take().map(|r| (r.0, r.1.clone())) {
        if row.len() != 3 || row[0] != "state" {
            return err(line, "expected `state <id> <num_actions>`");
        }
        let id: usize = parse_num(line, row[1], "a state id")?;
        let n_actions: usize = parse_num(line, row[2], "an action count")?;
        if id >= num_states {
            return err(line, format!("state id {id} out of range (num_states = {num_states})"));
        }
        if actions[id].is_some() {
            return err(line, format!("state {id} listed twice"));
        }
        let mut acts = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let (line, row) = match records.take() {
                Some(r) => (r.0, r.1.clone()),
                None => return err(records.last_line(), "unexpected end of file inside a state block"),
            };
            if row.len() != 3 || row[0] != "action" {
                return err(line, "expected `action <cost> <k>`");
            }
            let cost: f64 = parse_num(line, row[1], "a cost")?;
            let k: usize = parse_num(line, row[2], "an outcome count")?;
            let mut transitions = Vec::with_capacity(k);
            for _ in 0..k {
                let (line, row) = match records.take() {
                    Some(r) => (r.0, r.1.clone()),
                    None => return err(records.last_line(), "unexpected end of file inside an action block"),
                };
                if row.len() != 2 {
                    return err(line, "expected `<succ_id> <prob>`");
                }
                let succ: u32 = parse_num(line, row[0], "a successor id")?;
                let prob: f64 = parse_num(line, row[1], "a probability")?;
                transitions.push((StateId(succ), prob));
            }
            acts.push(Action { cost, transitions });
        }
        actions[id] = Some(acts);
    }

    let mut table = Vec::with_capacity(num_states);
    for (id, entry) in actions.into_iter().enumerate() {
        match entry {
            Some(acts) => table.push(acts),
            None => {
                return err(
                    records.last_line(),
                    format!("state {id} has no `state` record"),
                )
            }
        }
    }
    Ok(Mdp::new(num_states, StateId(initial), goals, table)?)
}

pub fn serialize_mdp(mdp: &Mdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mdp {}", mdp.num_states());
    let _ = writeln!(out, "initial {}", mdp.initial());
    let mut goals_line = String::from("goals");
    for g in mdp.goals() {
        let _ = write!(goals_line, " {g}");
    }
    out.push_str(&goals_line);
    out.push('\n');
    for s in mdp.states() {
        let acts = mdp.actions(s);
        let _ = writeln!(out, "state {} {}", s, acts.len());
        for act in acts {
            let _ = writeln!(out, "action {} {}", act.cost, act.transitions.len());
            for &(succ, p) in &act.transitions {
                let _ = writeln!(out, "{succ} {p}");
            }
        }
    }
    out
}

/// A value function file: one value per line in state order (`inf` allowed),
/// `#` comments and blank lines skipped. Goal entries are pinned to zero on
/// load.
pub fn parse_value_fn(text: &str, mdp: &Mdp) -> Result<ValueFn, FormatError> {
    let mut values = Vec::with_capacity(mdp.num_states());
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = parse_num(i + 1, body, "a value")?;
        if v.is_nan() || v < 0.0 {
            return err(i + 1, format!("value {v} must be non-negative"));
        }
        values.push(v);
    }
    if values.len() != mdp.num_states() {
        return err(
            0,
            format!(
                "value file holds {} entries but the instance has {} states",
                values.len(),
                mdp.num_states()
            ),
        );
    }
    let mut vf = ValueFn::from_vec(values);
    for &g in mdp.goals() {
        vf.set(g, 0.0);
    }
    Ok(vf)
}
