use serde::{Deserialize, Serialize};

use super::network::{SignConvention, SpinNetwork};
use crate::numerics::SeededRng;
use crate::{Error, Result};

/// One asynchronous Glauber update: a uniformly chosen site is set to 1
/// with its logistic probability, else to 0.
pub fn boltzmann_step(net: &SpinNetwork, v: &[u8], rng: &mut SeededRng, convention: SignConvention) -> Result<Vec<u8>> {
    net.check_state(v)?;
    let mut w = v.to_vec();
    glauber_update(net, &mut w, rng, convention);
    Ok(w)
}

/// In-place Glauber update without validation; returns the chosen site.
pub(crate) fn glauber_update(net: &SpinNetwork, v: &mut [u8], rng: &mut SeededRng, convention: SignConvention) -> usize {
    let i = rng.below(net.m());
    let p = net.on_probability(i, v, convention);
    v[i] = u8::from(rng.uniform() < p);
    i
}

/// Deterministic limit of the stochastic update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfieldRule {
    /// `v_i ← 1` iff the update probability exceeds ½.
    #[default]
    Threshold,
    /// `v_i ← 1` iff the update probability is positive, which the logistic
    /// always is: every state is driven to all ones.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrder {
    /// Sites `1, …, M` in turn, each seeing the latest values.
    #[default]
    Sequential,
    Synchronous,
}

impl std::str::FromStr for HopfieldRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Self::Threshold),
            "literal" => Ok(Self::Literal),
            other => Err(Error::Config(format!("unknown Hopfield rule '{other}' (expected threshold or literal)"))),
        }
    }
}

impl std::str::FromStr for UpdateOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "synchronous" => Ok(Self::Synchronous),
            other => Err(Error::Config(format!("unknown update order '{other}' (expected sequential or synchronous)"))),
        }
    }
}

fn hopfield_value(net: &SpinNetwork, i: usize, v: &[u8], rule: HopfieldRule, convention: SignConvention) -> u8 {
    let p = net.on_probability(i, v, convention);
    u8::from(match rule {
        HopfieldRule::Threshold => p > 0.5,
        HopfieldRule::Literal => p > 0.0,
    })
}

/// One sweep of the deterministic update.
pub fn hopfield_step(
    net: &SpinNetwork,
    v: &[u8],
    rule: HopfieldRule,
    order: UpdateOrder,
    convention: SignConvention,
) -> Result<Vec<u8>> {
    net.check_state(v)?;
    Ok(match order {
        UpdateOrder::Synchronous => (0..net.m()).map(|i| hopfield_value(net, i, v, rule, convention)).collect(),
        UpdateOrder::Sequential => {
            let mut w = v.to_vec();
            for i in 0..net.m() {
                w[i] = hopfield_value(net, i, &w, rule, convention);
            }
            w
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfieldRun {
    pub states: Vec<Vec<u8>>,
    /// The last sweep left the state unchanged.
    pub fixed_point: bool,
    /// Literal rule ended in the all-ones state, its generic absorbing state.
    pub literal_all_ones: bool,
}

/// Sweeps until a fixed point or `max_sweeps`.
pub fn hopfield_run(
    net: &SpinNetwork,
    v0: &[u8],
    max_sweeps: usize,
    rule: HopfieldRule,
    order: UpdateOrder,
    convention: SignConvention,
) -> Result<HopfieldRun> {
    net.check_state(v0)?;
    let mut states = vec![v0.to_vec()];
    let mut fixed_point = false;
    for _ in 0..max_sweeps {
        let next = hopfield_step(net, states.last().expect("nonempty"), rule, order, convention)?;
        if &next == states.last().expect("nonempty") {
            fixed_point = true;
            break;
        }
        states.push(next);
    }
    let last = states.last().expect("nonempty");
    let literal_all_ones = rule == HopfieldRule::Literal && last.iter().all(|&s| s == 1);
    Ok(HopfieldRun { states, fixed_point, literal_all_ones })
}
