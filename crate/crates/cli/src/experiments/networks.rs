use std::sync::Arc;

use dyn_nn_lab::morse::{classify_function, named_field, BoxDomain, NetworkField, ScalarField, SearchParams, MORSE_FIELD_IDS};
use dyn_nn_lab::networks::{
    estimate_lipschitz_lower_bound, memory_report as report, ndde_forward as dde_forward, ndde_trajectory, node_forward as ode_forward,
    rk4_trajectory, BuiltinField, DelayVectorField, Delayed, EmbedTarget, Instantaneous, NetworkSpec, NeuralDdeSpec, NeuralOdeSpec,
    VectorField,
};
use dyn_nn_lab::table::{Cell, Table};
use dyn_nn_lab::SeededRng;

use crate::config::{key, Config, Key};
use crate::error::{CliError, KeyContext};
use crate::output::{Artifact, Outcome, PlotSpec};

fn network_keys() -> Vec<Key> {
    vec![
        key("network.file", "", "JSON network; when set, the field keys below are ignored"),
        key("network.field", "tanh-net:1", "vector field id (zero | linear:<a> | decay:<r> | tanh-net:<seed>)"),
        key("network.dim", "2", "state dimension for network.field"),
        key("network.t_end", "1", "depth horizon T"),
        key("network.steps", "100", "RK4 steps"),
    ]
}

fn load_file(cfg: &Config) -> Result<NetworkSpec<f64>, CliError> {
    let path = cfg.raw("network.file");
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("network.file", format!("cannot read {path}: {e}")))?;
    NetworkSpec::from_json_str(&text).for_key("network.file")
}

fn builtin_field(cfg: &Config) -> Result<(Arc<dyn VectorField<f64>>, String), CliError> {
    let d = cfg.usize_at_least("network.dim", 1)?;
    let id = cfg.raw("network.field");
    Ok((Arc::new(BuiltinField::from_id(id, d).for_key("network.field")?), id.to_string()))
}

fn input(cfg: &Config, key: &str, d: usize) -> Result<Vec<f64>, CliError> {
    let x = cfg.list_f64(key)?;
    match x.len() {
        1 => Ok(vec![x[0]; d]),
        n if n == d => Ok(x),
        n => Err(CliError::config(key, format!("needs {d} entries (or one to broadcast), got {n}"))),
    }
}

fn trajectory_table(states: &[Vec<f64>], dt: f64) -> Result<Table, CliError> {
    let m = states[0].len();
    let mut t = Table::new(std::iter::once("t".to_string()).chain((1..=m).map(|i| format!("h_{i}"))));
    for (n, h) in states.iter().enumerate() {
        t.push(std::iter::once(Cell::from(n as f64 * dt)).chain(h.iter().map(|&v| Cell::from(v))).collect())?;
    }
    Ok(t)
}

fn output_table(y: &[f64]) -> Result<Table, CliError> {
    let mut t = Table::new(["index", "value"]);
    for (i, &v) in y.iter().enumerate() {
        t.push(vec![Cell::from(i), Cell::from(v)])?;
    }
    Ok(t)
}

fn first_columns(t: &Table) -> PlotSpec {
    let ys: Vec<&str> = t.headers()[1..].iter().take(6).map(String::as_str).collect();
    PlotSpec::new("t", &ys)
}

pub fn node_keys() -> Vec<Key> {
    let mut k = network_keys();
    k.push(key("node.input", "0.5,-0.5", "input x (one value broadcasts)"));
    k
}

pub fn node_forward(cfg: &Config) -> Result<Outcome, CliError> {
    let spec = if cfg.is_set("network.file") {
        match load_file(cfg)? {
            NetworkSpec::Node(s) => s,
            _ => return Err(CliError::config("network.file", "node-forward needs a neural ODE network")),
        }
    } else {
        let (field, id) = builtin_field(cfg)?;
        let mut s = NeuralOdeSpec::identity_affine(field, cfg.positive("network.t_end")?, cfg.usize_at_least("network.steps", 1)?)
            .for_key("network.t_end")?;
        s.field_id = Some(id);
        s
    };
    let x = input(cfg, "node.input", spec.input_dim())?;
    let h0 = spec.lift(&x).for_key("node.input")?;
    let states = rk4_trajectory(spec.field.as_ref(), &h0, spec.t_end, spec.steps)?;
    let y = ode_forward(&spec, &x)?;
    let traj = trajectory_table(&states, spec.t_end / spec.steps as f64)?;
    let mut out = Outcome::default();
    let plot = first_columns(&traj);
    out.push(Artifact::new("node_trajectory", traj).plotted(plot));
    out.push(Artifact::new("node_output", output_table(&y)?));
    out.note(format!("output: {}", y.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")));
    Ok(out)
}

pub fn ndde_keys() -> Vec<Key> {
    let mut k = network_keys();
    k.extend([
        key("network.tau", "0.5", "delay τ ≥ 0"),
        key("ndde.delay", "delayed", "delayed (field sees h(t−τ)) | instantaneous (field sees h(t))"),
        key("ndde.input", "0.5,-0.5", "input x (one value broadcasts)"),
    ]);
    k
}

pub fn ndde_forward(cfg: &Config) -> Result<Outcome, CliError> {
    let spec = if cfg.is_set("network.file") {
        match load_file(cfg)? {
            NetworkSpec::Ndde(s) => s,
            _ => return Err(CliError::config("network.file", "ndde-forward needs a neural DDE network (set \"tau\")")),
        }
    } else {
        let (field, id) = builtin_field(cfg)?;
        let f: Arc<dyn DelayVectorField<f64>> = match cfg.raw("ndde.delay") {
            "delayed" => Arc::new(Delayed(field)),
            "instantaneous" => Arc::new(Instantaneous(field)),
            other => return Err(CliError::config("ndde.delay", format!("expected delayed or instantaneous, got '{other}'"))),
        };
        let tau = cfg.nonnegative("network.tau")?;
        let mut s = NeuralDdeSpec::identity_affine(f, tau, cfg.positive("network.t_end")?, cfg.usize_at_least("network.steps", 1)?)
            .for_key("network.tau")?;
        s.field_id = Some(id);
        s
    };
    let x = input(cfg, "ndde.input", spec.input_dim())?;
    let states = ndde_trajectory(&spec, &x)?;
    let y = dde_forward(&spec, &x)?;
    let steps = spec.effective_steps();
    let traj = trajectory_table(&states, spec.t_end / steps as f64)?;
    let mut out = Outcome::default();
    let plot = first_columns(&traj);
    out.push(Artifact::new("ndde_trajectory", traj).plotted(plot));
    out.push(Artifact::new("ndde_output", output_table(&y)?));
    out.note(format!("effective_steps: {steps}"));
    out.note(format!("output: {}", y.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")));
    Ok(out)
}

pub fn memory_keys() -> Vec<Key> {
    vec![
        key("memory.k", "", "Lipschitz constant K; empty estimates it from network.field"),
        key("memory.tau", "1", "delay τ"),
        key("memory.k_psi", "", "target Lipschitz constant K_Ψ (with memory.w and memory.w_tilde)"),
        key("memory.w", "", "target input scale w"),
        key("memory.w_tilde", "", "target output scale w̃"),
        key("memory.radius", "2", "box half-width for the K estimate"),
        key("memory.pairs", "2000", "random pairs for the K estimate"),
        key("network.field", "tanh-net:1", "vector field whose K is estimated"),
        key("network.dim", "2", "state dimension for network.field"),
    ]
}

pub fn memory_report(cfg: &Config) -> Result<Outcome, CliError> {
    let (k, source) = match cfg.opt_f64("memory.k")? {
        Some(k) => (k, "given"),
        None => {
            let d = cfg.usize_at_least("network.dim", 1)?;
            let f = BuiltinField::<f64>::from_id(cfg.raw("network.field"), d).for_key("network.field")?;
            let mut rng = SeededRng::new(cfg.u64("seed")?);
            let k = estimate_lipschitz_lower_bound(&f, 0.0, cfg.positive("memory.radius")?, cfg.usize_at_least("memory.pairs", 1)?, &mut rng);
            (k, "sampled-lower-bound")
        }
    };
    let target = match (cfg.opt_f64("memory.k_psi")?, cfg.opt_f64("memory.w")?, cfg.opt_f64("memory.w_tilde")?) {
        (Some(k_psi), Some(w), Some(w_tilde)) => Some(EmbedTarget { k_psi, w, w_tilde }),
        (None, None, None) => None,
        _ => return Err(CliError::config("memory.k_psi", "memory.k_psi, memory.w and memory.w_tilde must be set together")),
    };
    let r = report(k, cfg.f64("memory.tau")?, target).for_key("memory.tau")?;
    let mut t = Table::new(["k", "tau", "k_tau", "small_memory", "embed_threshold", "embed_capable", "k_source"]);
    t.push(vec![
        Cell::from(r.k),
        Cell::from(r.tau),
        Cell::from(r.product()),
        Cell::from(r.small_memory_flag()),
        r.embed_threshold().map_or(Cell::Empty, Cell::from),
        Cell::from(r.embed_capable_flag()),
        Cell::from(source),
    ])?;
    let mut out = Outcome::default();
    out.push(Artifact::new("memory_report", t));
    out.note(format!("k_tau: {:?}", r.product()));
    out.note(format!("small_memory: {}", r.small_memory_flag()));
    out.note(format!("embed_capable: {}", r.embed_capable_flag()));
    Ok(out)
}

pub fn morse_keys() -> Vec<Key> {
    vec![
        key("morse.field", "circle", "analytic probe id, or `network` to use network.file"),
        key("network.file", "", "JSON network with scalar output for morse.field = network"),
        key("morse.radius", "2", "half-width of the search cube"),
        key("morse.starts", "64", "Newton starts"),
        key("morse.grad_tol", "1e-8", "gradient norm accepted as critical"),
        key("morse.degen_tol", "1e-6", "relative min |eigenvalue| below which a point is degenerate"),
        key("morse.merge_radius", "1e-4", "points closer than this are merged"),
        key("morse.grad_floor", "1e-5", "grid gradient floor required for a C1 verdict"),
    ]
}

pub fn morse_classify(cfg: &Config) -> Result<Outcome, CliError> {
    let field: Box<dyn ScalarField<f64>> = match cfg.raw("morse.field") {
        "network" => {
            if !cfg.is_set("network.file") {
                return Err(CliError::config("network.file", "required when morse.field = network"));
            }
            Box::new(NetworkField(load_file(cfg)?))
        }
        id if MORSE_FIELD_IDS.contains(&id) => named_field(id).for_key("morse.field")?,
        other => {
            return Err(CliError::config("morse.field", format!("unknown field '{other}' (expected network or one of {})", MORSE_FIELD_IDS.join(", "))))
        }
    };
    let params = SearchParams {
        starts: cfg.usize_at_least("morse.starts", 1)?,
        grad_tol: cfg.positive("morse.grad_tol")?,
        degen_tol: cfg.positive("morse.degen_tol")?,
        merge_radius: cfg.positive("morse.merge_radius")?,
        grad_floor: cfg.positive("morse.grad_floor")?,
    };
    let domain = BoxDomain::cube(field.dim(), cfg.positive("morse.radius")?);
    let rep = classify_function(field.as_ref(), &domain, &params, &mut SeededRng::new(cfg.u64("seed")?)).for_key("morse.field")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("morse_classify", rep.to_table()));
    out.note(format!("verdict: {}", rep.verdict));
    out.note(format!("critical_points: {}", rep.critical_points.len()));
    Ok(out)
}
