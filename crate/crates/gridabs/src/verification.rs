//! Finite-horizon dynamic programming over the abstract model: safety and
//! reach-avoid probabilities, and optimal (max/min) policy synthesis for MDPs.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::abstraction::AbstractModel;
use crate::error::{Error, Result};
use crate::gridding::Partition;
use crate::abstraction::locate_state;

/// Optimization direction for MDP policy synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Max,
    Min,
}

/// Value function over all abstract states (absorbing state included) for
/// steps `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    /// `(N+1) x (p+1)` rows: `per_step[k][z]` is the value at step `k`.
    pub per_step: Vec<Vec<f64>>,
}

impl ValueFunction {
    /// Values at step 0 — the quantities of interest.
    pub fn v0(&self) -> &[f64] {
        &self.per_step[0]
    }

    pub fn horizon(&self) -> usize {
        self.per_step.len() - 1
    }
}

/// Deterministic Markov policy: `choice[k][z]` is the input index applied at
/// step `k` in state `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub choice: Vec<Vec<usize>>,
}

fn check_horizon(n: i64) -> Result<usize> {
    if n < 0 {
        return Err(Error::NegativeHorizon);
    }
    Ok(n as usize)
}

fn indicator(len: usize, set: &BTreeSet<usize>) -> Vec<f64> {
    (0..len).map(|z| if set.contains(&z) { 1.0 } else { 0.0 }).collect()
}

fn expect_mc(model: &AbstractModel) -> Result<()> {
    if model.is_mdp() {
        return Err(Error::InvalidModel(
            "this operation requires an MC; use the MDP variant".into(),
        ));
    }
    Ok(())
}

fn expect_mdp(model: &AbstractModel) -> Result<()> {
    if !model.is_mdp() {
        return Err(Error::InvalidModel(
            "this operation requires an MDP; use the MC variant".into(),
        ));
    }
    Ok(())
}

fn expected_value(row: &[f64], next: &[f64]) -> f64 {
    row.iter().zip(next).map(|(p, v)| p * v).sum()
}

/// `V_N = 1_A`, `V_k(z) = 1_A(z) * sum_z' T(z,z') V_{k+1}(z')`: probability of
/// remaining in the safe set over the whole horizon.
pub fn safety_dp_mc(model: &AbstractModel, safe: &BTreeSet<usize>, n: i64) -> Result<ValueFunction> {
    expect_mc(model)?;
    let n = check_horizon(n)?;
    let states = model.num_states();
    let mut per_step = vec![indicator(states, safe)];
    for _ in 0..n {
        let next = per_step.last().unwrap();
        let current: Vec<f64> = (0..states)
            .into_par_iter()
            .map(|z| {
                if safe.contains(&z) {
                    expected_value(model.row(0, z), next)
                } else {
                    0.0
                }
            })
            .collect();
        per_step.push(current);
    }
    per_step.reverse();
    Ok(ValueFunction { per_step })
}

/// Bounded-until recursion: `V_N = 1_Psi`; before that, `Psi` states are
/// success (value 1), `Phi \ Psi` states propagate, everything else is 0.
pub fn reach_avoid_dp_mc(
    model: &AbstractModel,
    phi: &BTreeSet<usize>,
    psi: &BTreeSet<usize>,
    n: i64,
) -> Result<ValueFunction> {
    expect_mc(model)?;
    let n = check_horizon(n)?;
    let states = model.num_states();
    let mut per_step = vec![indicator(states, psi)];
    for _ in 0..n {
        let next = per_step.last().unwrap();
        let current: Vec<f64> = (0..states)
            .into_par_iter()
            .map(|z| {
                if psi.contains(&z) {
                    1.0
                } else if phi.contains(&z) {
                    expected_value(model.row(0, z), next)
                } else {
                    0.0
                }
            })
            .collect();
        per_step.push(current);
    }
    per_step.reverse();
    Ok(ValueFunction { per_step })
}

/// Best input and its value; ties go to the lowest input index.
fn optimize(
    model: &AbstractModel,
    z: usize,
    next: &[f64],
    objective: Objective,
) -> (usize, f64) {
    let q = model.num_inputs();
    let mut best_input = 0;
    let mut best = expected_value(model.row(0, z), next);
    for input in 1..q {
        let value = expected_value(model.row(input, z), next);
        let improves = match objective {
            Objective::Max => value > best,
            Objective::Min => value < best,
        };
        if improves {
            best = value;
            best_input = input;
        }
    }
    (best_input, best)
}

/// Bellman recursion with per-step optimization over inputs; the policy
/// records the chosen input for every state at every step.
pub fn safety_dp_mdp(
    model: &AbstractModel,
    safe: &BTreeSet<usize>,
    n: i64,
    objective: Objective,
) -> Result<(ValueFunction, Policy)> {
    expect_mdp(model)?;
    let n = check_horizon(n)?;
    let states = model.num_states();
    let mut per_step = vec![indicator(states, safe)];
    let mut choice_rev: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        let next = per_step.last().unwrap();
        let step: Vec<(usize, f64)> = (0..states)
            .into_par_iter()
            .map(|z| {
                let (input, value) = optimize(model, z, next, objective);
                (input, if safe.contains(&z) { value } else { 0.0 })
            })
            .collect();
        choice_rev.push(step.iter().map(|&(input, _)| input).collect());
        per_step.push(step.into_iter().map(|(_, value)| value).collect());
    }
    per_step.reverse();
    choice_rev.reverse();
    Ok((ValueFunction { per_step }, Policy { choice: choice_rev }))
}

/// Reach-avoid analogue of [`safety_dp_mdp`].
pub fn reach_avoid_dp_mdp(
    model: &AbstractModel,
    phi: &BTreeSet<usize>,
    psi: &BTreeSet<usize>,
    n: i64,
    objective: Objective,
) -> Result<(ValueFunction, Policy)> {
    expect_mdp(model)?;
    let n = check_horizon(n)?;
    let states = model.num_states();
    let mut per_step = vec![indicator(states, psi)];
    let mut choice_rev: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        let next = per_step.last().unwrap();
        let step: Vec<(usize, f64)> = (0..states)
            .into_par_iter()
            .map(|z| {
                let (input, value) = optimize(model, z, next, objective);
                if psi.contains(&z) {
                    (input, 1.0)
                } else if phi.contains(&z) {
                    (input, value)
                } else {
                    (input, 0.0)
                }
            })
            .collect();
        choice_rev.push(step.iter().map(|&(input, _)| input).collect());
        per_step.push(step.into_iter().map(|(_, value)| value).collect());
    }
    per_step.reverse();
    choice_rev.reverse();
    Ok((ValueFunction { per_step }, Policy { choice: choice_rev }))
}

/// Result of evaluating the value function at a concrete initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub probability: f64,
    /// `None` means the point falls outside the domain (absorbing state).
    pub state: Option<usize>,
    pub labels: Vec<String>,
}

/// Locate `s0` in the partition and read off `V_0` plus the state's labels.
pub fn query_initial(
    values: &ValueFunction,
    partition: &Partition,
    labels: &std::collections::BTreeMap<String, BTreeSet<usize>>,
    s0: &[f64],
) -> QueryResult {
    match locate_state(partition, s0) {
        Some(idx) => QueryResult {
            probability: values.v0()[idx],
            state: Some(idx),
            labels: labels
                .iter()
                .filter(|(_, states)| states.contains(&idx))
                .map(|(sym, _)| sym.clone())
                .collect(),
        },
        None => QueryResult {
            probability: 0.0,
            state: None,
            labels: Vec::new(),
        },
    }
}
