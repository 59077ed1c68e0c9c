use dyn_nn_lab::discrete_ips::{
    boltzmann_exact_distribution, detailed_balance_defect, distribution_table, gibbs_stationary_check, kl_objective as kl,
    visible_marginal, SignConvention, SpinNetwork, MAX_BALANCE_SITES,
};
use dyn_nn_lab::table::{Cell, Table};
use dyn_nn_lab::{Matrix64, SeededRng};

use crate::config::{key, Config, Key};
use crate::error::{CliError, KeyContext};
use crate::output::{Artifact, Outcome, PlotSpec};

fn spin_keys() -> Vec<Key> {
    vec![
        key("spin.couplings", "0,2;2,0", "symmetric coupling matrix A with zero diagonal, rows split by ';'"),
        key("spin.biases", "0,0", "biases b"),
        key("spin.random_sites", "0", "when positive, draw a random M-site network from the seed instead"),
        key("spin.convention", "balanced", "balanced | literal sign in the update probability"),
    ]
}

fn load_network(cfg: &Config, rng: &SeededRng) -> Result<SpinNetwork, CliError> {
    let m = cfg.usize_at_least("spin.random_sites", 0)?;
    if m == 0 {
        return SpinNetwork::new(cfg.matrix("spin.couplings")?, cfg.list_f64("spin.biases")?).for_key("spin.couplings");
    }
    let mut r = rng.child(0);
    let mut a = Matrix64::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let w = r.normal();
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    let b = (0..m).map(|_| r.normal()).collect();
    SpinNetwork::new(a, b).for_key("spin.random_sites")
}

fn convention(cfg: &Config) -> Result<SignConvention, CliError> {
    cfg.parse("spin.convention")
}

pub fn stationary_keys() -> Vec<Key> {
    let mut k = spin_keys();
    k.extend([
        key("gibbs.steps", "1000000", "single-site updates counted"),
        key("gibbs.burn_in", "1000", "updates discarded first"),
    ]);
    k
}

pub fn stationary(cfg: &Config) -> Result<Outcome, CliError> {
    let rng = SeededRng::new(cfg.u64("seed")?);
    let net = load_network(cfg, &rng)?;
    let conv = convention(cfg)?;
    let p = boltzmann_exact_distribution(&net).for_key("spin.couplings")?;
    let rep = gibbs_stationary_check(
        &net,
        cfg.usize_at_least("gibbs.steps", 0)?,
        cfg.usize_at_least("gibbs.burn_in", 0)?,
        &mut rng.child(1),
        conv,
    )
    .for_key("spin.couplings")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("boltzmann_exact", distribution_table(&p)));
    out.push(Artifact::new("boltzmann_tv", rep.to_table()).plotted(PlotSpec::new("steps", &["tv_distance"])));
    out.note(format!("tv_distance: {:?}", rep.tv));
    out.note(format!("tv_stderr: {:?}", rep.stderr));
    out.note(format!("low_confidence: {}", rep.low_confidence));
    if net.m() <= MAX_BALANCE_SITES {
        out.note(format!("detailed_balance_defect: {:?}", detailed_balance_defect(&net, conv)?));
    }
    Ok(out)
}

pub fn kl_keys() -> Vec<Key> {
    let mut k = spin_keys();
    k.extend([
        key("kl.visible", "1", "number of leading visible sites"),
        key("kl.p_plus", "model", "target law on visible states: `model`, `uniform`, or 2^visible probabilities"),
    ]);
    k
}

pub fn kl_objective(cfg: &Config) -> Result<Outcome, CliError> {
    let net = load_network(cfg, &SeededRng::new(cfg.u64("seed")?))?;
    let visible = cfg.usize_at_least("kl.visible", 1)?;
    let model = visible_marginal(&net, visible).for_key("kl.visible")?;
    let p_plus = match cfg.raw("kl.p_plus") {
        "model" => model.clone(),
        "uniform" => vec![1.0 / model.len() as f64; model.len()],
        _ => cfg.list_f64("kl.p_plus")?,
    };
    let value = kl(&p_plus, &net, visible).for_key("kl.p_plus")?;
    let mut marg = Table::new(["state_index", "p_plus", "p_model"]);
    for (i, (a, b)) in p_plus.iter().zip(&model).enumerate() {
        marg.push(vec![Cell::from(i), Cell::from(*a), Cell::from(*b)])?;
    }
    let mut obj = Table::new(["visible", "kl"]);
    obj.push(vec![Cell::from(visible), Cell::from(value)])?;
    let mut out = Outcome::default();
    out.push(Artifact::new("kl_marginals", marg));
    out.push(Artifact::new("kl_objective", obj));
    out.note(format!("kl: {value:?}"));
    Ok(out)
}
