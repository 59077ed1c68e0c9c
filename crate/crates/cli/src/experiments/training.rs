use std::sync::Arc;

use dyn_nn_lab::networks::{BuiltinField, VectorField};
use dyn_nn_lab::numerics::finite_diff_jacobian;
use dyn_nn_lab::table::{Cell, Table};
use dyn_nn_lab::training::{
    batch_normal_jacobians, edge_of_stability_trace, find_minimum, lyapunov_exponent, milnor_probe as probe, ode_stages,
    tangent_normal_split, vanishing_gradient_demo, variational_propagate, FiniteMatrixLaw, GdConfig, LossKind, LossModel,
    MinimizeSchedule, ProbeTarget, Propagation, RunVerdict, DEFAULT_RANK_TOL,
};
use dyn_nn_lab::{Matrix64, SeededRng};

use crate::config::{key, Config, Key};
use crate::error::{CliError, KeyContext};
use crate::output::{Artifact, Outcome, PlotSpec};

pub const LOSS_IDS: [&str; 3] = ["prod2", "quadratic", "two-point-scalar"];

fn loss_keys(default_id: &'static str) -> Vec<Key> {
    vec![
        key("model.id", default_id, "loss: prod2 | quadratic | two-point-scalar"),
        key("model.loss", "", "squared | half-squared; empty keeps the loss's usual form"),
        key("model.curvature", "4", "diagonal of Q for the quadratic loss L = θᵀQθ/2"),
    ]
}

/// The loss and its default starting point.
fn load_loss(cfg: &Config) -> Result<(LossModel<f64>, Vec<f64>), CliError> {
    let kind = |default: LossKind| -> Result<LossKind, CliError> {
        if cfg.is_set("model.loss") { cfg.parse("model.loss") } else { Ok(default) }
    };
    match cfg.raw("model.id") {
        "prod2" => Ok((LossModel::prod2(kind(LossKind::Squared)?), vec![2.5, 0.41])),
        "two-point-scalar" => {
            let m = LossModel::scalar_linear(&[(1.0, 0.0), (2.0, 0.0)], kind(LossKind::HalfSquared)?).for_key("model.id")?;
            Ok((m, vec![0.5]))
        }
        "quadratic" => {
            if kind(LossKind::HalfSquared)? != LossKind::HalfSquared {
                return Err(CliError::config("model.loss", "the quadratic loss is always θᵀQθ/2"));
            }
            let c = cfg.list_f64("model.curvature")?;
            let m = LossModel::quadratic(&Matrix64::from_diag(&c)).for_key("model.curvature")?;
            Ok((m, vec![1.0; c.len()]))
        }
        other => Err(CliError::config("model.id", format!("unknown loss '{other}' (expected one of {})", LOSS_IDS.join(", ")))),
    }
}

fn theta0(cfg: &Config, model: &LossModel<f64>, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
    let t = if cfg.is_set("gd.theta0") { cfg.list_f64("gd.theta0")? } else { default };
    if t.len() != model.param_dim() {
        return Err(CliError::config("gd.theta0", format!("needs {} entries, got {}", model.param_dim(), t.len())));
    }
    Ok(t)
}

/// `model.theta_star` if given, else an interpolating point found by
/// step-size-controlled descent from `gd.theta0`.
fn theta_star(cfg: &Config, model: &LossModel<f64>, start: &[f64]) -> Result<Vec<f64>, CliError> {
    if cfg.is_set("model.theta_star") {
        let t = cfg.list_f64("model.theta_star")?;
        if t.len() != model.param_dim() {
            return Err(CliError::config("model.theta_star", format!("needs {} entries", model.param_dim())));
        }
        return Ok(t);
    }
    let r = find_minimum(model, start, &MinimizeSchedule::default()).for_key("gd.theta0")?;
    if !r.on_manifold {
        return Err(CliError::config("gd.theta0", format!("descent from here did not interpolate (residual {})", r.residual)));
    }
    Ok(r.theta)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn edge_keys() -> Vec<Key> {
    let mut k = loss_keys("prod2");
    k.extend([
        key("gd.eta", "0.2", "learning rate"),
        key("gd.steps", "20000", "maximum number of steps"),
        key("gd.stop_grad_tol", "1e-14", "stop once the gradient norm is this small"),
        key("gd.theta0", "", "start; empty uses the loss's default"),
        key("trace.stride", "50", "record every n-th step"),
    ]);
    k
}

pub fn edge_of_stability(cfg: &Config) -> Result<Outcome, CliError> {
    let (model, default) = load_loss(cfg)?;
    let start = theta0(cfg, &model, default)?;
    let gd = GdConfig::new(cfg.positive("gd.eta")?, cfg.usize_at_least("gd.steps", 1)?)
        .with_stop_grad_tol(cfg.nonnegative("gd.stop_grad_tol")?);
    let stride = cfg.usize_at_least("trace.stride", 1)?;
    let tr = edge_of_stability_trace(&model, &start, &gd, stride).for_key("gd.eta")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("edge_of_stability", tr.to_table()).plotted(PlotSpec::new("step", &["sharpness", "threshold"])));
    let end = tr.trajectory.final_theta();
    out.note(format!("verdict: {:?}", tr.trajectory.verdict));
    out.note(format!("steps: {}", tr.trajectory.steps));
    out.note(format!("final_theta: {}", fmt_vec(end)));
    out.note(format!("terminal_sharpness: {:?}", tr.terminal_sharpness()));
    out.note(format!("threshold_2_over_eta: {:?}", 2.0 / gd.eta));
    if let RunVerdict::Diverged { step } = tr.trajectory.verdict {
        out.divergence = Some(format!("gradient descent left the guard ball at step {step}"));
    } else {
        out.note(format!("interpolation_residual: {:?}", model.interpolation_residual(end).for_key("model.id")?));
    }
    Ok(out)
}

pub fn lyapunov_keys() -> Vec<Key> {
    let mut k = loss_keys("two-point-scalar");
    k.extend([
        key("lyapunov.source", "sgd", "sgd (batch Jacobians at a minimum) | scalars | matrix"),
        key("lyapunov.values", "0.6,-0.6", "equiprobable scalars for source = scalars"),
        key("lyapunov.matrix", "0.5,1;0,0.8", "rows ';', entries ',' for source = matrix"),
        key("lyapunov.steps", "100000", "product length per replicate"),
        key("lyapunov.replicates", "20", "independent replicates"),
        key("gd.eta", "0.4", "learning rate in the batch Jacobians"),
        key("gd.batch", "1", "mini-batch size"),
        key("gd.theta0", "", "start of the minimum search; empty uses the loss's default"),
        key("model.theta_star", "", "minimum; empty searches from gd.theta0"),
    ]);
    k
}

pub fn lyapunov(cfg: &Config) -> Result<Outcome, CliError> {
    let rng = SeededRng::new(cfg.u64("seed")?);
    let mut out = Outcome::default();
    let law = match cfg.raw("lyapunov.source") {
        "scalars" => FiniteMatrixLaw::scalars(&cfg.list_f64("lyapunov.values")?).for_key("lyapunov.values")?,
        "matrix" => FiniteMatrixLaw::deterministic(cfg.matrix("lyapunov.matrix")?).for_key("lyapunov.matrix")?,
        "sgd" => {
            let (model, default) = load_loss(cfg)?;
            let start = theta0(cfg, &model, default)?;
            let star = theta_star(cfg, &model, &start)?;
            let split = tangent_normal_split(&model, &star, DEFAULT_RANK_TOL).for_key("model.theta_star")?;
            if split.normal_dim() == 0 {
                return Err(CliError::config("model.theta_star", "the Hessian vanishes here; there is no normal space"));
            }
            let eta = cfg.positive("gd.eta")?;
            let b = cfg.usize_at_least("gd.batch", 1)?;
            let jac = batch_normal_jacobians(&model, &star, eta, b, &split.normal, &mut rng.child(u64::MAX)).for_key("gd.batch")?;
            out.note(format!("theta_star: {}", fmt_vec(&star)));
            out.note(format!("batch_matrices: {} (exhaustive: {})", jac.matrices.len(), jac.exhaustive));
            FiniteMatrixLaw::uniform(jac.matrices).for_key("gd.batch")?
        }
        other => return Err(CliError::config("lyapunov.source", format!("expected sgd, scalars or matrix, got '{other}'"))),
    };
    let e = lyapunov_exponent(
        &law,
        cfg.usize_at_least("lyapunov.steps", 1)?,
        cfg.usize_at_least("lyapunov.replicates", 1)?,
        &rng,
    )
    .for_key("lyapunov.steps")?;
    out.push(Artifact::new("lyapunov", e.to_table()).plotted(PlotSpec::new("n", &["lambda_estimate"])));
    out.note(format!("lambda: {:?}", e.estimate));
    out.note(format!("stderr: {:?}", e.stderr));
    out.note(format!("clearly_negative: {}", e.clearly_negative()));
    Ok(out)
}

pub fn milnor_keys() -> Vec<Key> {
    let mut k = loss_keys("two-point-scalar");
    k.extend([
        key("gd.eta", "0.4", "learning rate"),
        key("gd.batch", "1", "mini-batch size; 0 runs full-batch descent"),
        key("gd.steps", "300", "steps per sample"),
        key("gd.theta0", "", "start of the minimum search; empty uses the loss's default"),
        key("model.theta_star", "", "minimum; empty searches from gd.theta0"),
        key("probe.radius", "0.1", "radius of the start ball"),
        key("probe.samples", "500", "number of starts"),
        key("probe.target", "isolated", "isolated (return to θ*) | manifold (reach any interpolating point nearby)"),
        key("probe.tol", "1e-6", "distance (isolated) or residual (manifold) counted as converged"),
        key("probe.neighborhood", "1", "manifold target: allowed distance from θ*"),
    ]);
    k
}

pub fn milnor_probe(cfg: &Config) -> Result<Outcome, CliError> {
    let (model, default) = load_loss(cfg)?;
    let start = theta0(cfg, &model, default)?;
    let star = theta_star(cfg, &model, &start)?;
    let mut gd = GdConfig::new(cfg.positive("gd.eta")?, cfg.usize_at_least("gd.steps", 1)?);
    let b: usize = cfg.parse("gd.batch")?;
    if b > 0 {
        if b >= model.data().len() {
            return Err(CliError::config("gd.batch", format!("must be below N = {} (0 selects full batch)", model.data().len())));
        }
        gd = gd.with_batch(b);
    }
    let tol = cfg.positive("probe.tol")?;
    let target = match cfg.raw("probe.target") {
        "isolated" => ProbeTarget::Isolated { tol },
        "manifold" => ProbeTarget::Manifold { tol, neighborhood: cfg.positive("probe.neighborhood")? },
        other => return Err(CliError::config("probe.target", format!("expected isolated or manifold, got '{other}'"))),
    };
    let rep = probe(
        &model,
        &star,
        cfg.positive("probe.radius")?,
        cfg.usize_at_least("probe.samples", 1)?,
        &gd,
        target,
        &SeededRng::new(cfg.u64("seed")?),
    )
    .for_key("gd.eta")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("milnor_probe", rep.to_table()));
    out.note(format!("theta_star: {}", fmt_vec(&star)));
    out.note(format!("converged_fraction: {:?}", rep.fraction));
    Ok(out)
}

pub fn vanishing_keys() -> Vec<Key> {
    vec![
        key("vg.epsilon", "0.01", "small curvature ε in (0, 1]"),
        key("vg.p0", "1,1", "initial point"),
        key("vg.horizon", "5", "integration horizon"),
        key("vg.dt", "0.01", "RK4 step"),
    ]
}

pub fn vanishing_gradient(cfg: &Config) -> Result<Outcome, CliError> {
    let p0 = cfg.list_f64("vg.p0")?;
    let [a, b] = p0[..] else { return Err(CliError::config("vg.p0", "needs two entries")) };
    let tr = vanishing_gradient_demo(cfg.positive("vg.epsilon")?, [a, b], cfg.nonnegative("vg.horizon")?, cfg.positive("vg.dt")?)
        .for_key("vg.epsilon")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("vanishing_gradient", tr.to_table()).plotted(PlotSpec::new("t", &["p1", "p2", "exact1", "exact2"])));
    out.note(format!("decay_times: {:?},{:?}", tr.decay_times[0], tr.decay_times[1]));
    out.note(format!("max_error: {:?}", tr.max_error));
    Ok(out)
}

pub fn variational_keys() -> Vec<Key> {
    vec![
        key("var.field", "tanh-net:2", "vector field id"),
        key("var.dim", "3", "state dimension"),
        key("var.t_end", "1", "horizon"),
        key("var.steps", "20", "RK4 steps"),
        key("var.input", "0.1,-0.4,0.9", "point at which the flow map is differentiated"),
        key("var.fd_step", "1e-6", "central-difference step"),
    ]
}

pub fn variational_check(cfg: &Config) -> Result<Outcome, CliError> {
    let d = cfg.usize_at_least("var.dim", 1)?;
    let field: Arc<dyn VectorField<f64>> = Arc::new(BuiltinField::from_id(cfg.raw("var.field"), d).for_key("var.field")?);
    let stages = ode_stages(field, cfg.positive("var.t_end")?, cfg.usize_at_least("var.steps", 1)?).for_key("var.steps")?;
    let x = cfg.list_f64("var.input")?;
    if x.len() != d {
        return Err(CliError::config("var.input", format!("needs {d} entries")));
    }
    let unit = |k: usize| (0..d).map(|i| f64::from(u8::from(i == k))).collect::<Vec<_>>();
    let mut fwd = Matrix64::zeros(d, d);
    let mut rev = Matrix64::zeros(d, d);
    for k in 0..d {
        let col = variational_propagate(&stages, &x, &Propagation::Forward(unit(k)))?.derivative;
        let row = variational_propagate(&stages, &x, &Propagation::Reverse(unit(k)))?.derivative;
        for i in 0..d {
            fwd[(i, k)] = col[i];
            rev[(k, i)] = row[i];
        }
    }
    let fd = finite_diff_jacobian(
        |p| variational_propagate(&stages, p, &Propagation::Forward(vec![0.0; d])).map(|r| r.output),
        &x,
        cfg.positive("var.fd_step")?,
    )?;
    let mut t = Table::new(["row", "col", "forward", "reverse", "finite_difference"]);
    for i in 0..d {
        for j in 0..d {
            t.push(vec![Cell::from(i), Cell::from(j), Cell::from(fwd[(i, j)]), Cell::from(rev[(i, j)]), Cell::from(fd[(i, j)])])?;
        }
    }
    let mut out = Outcome::default();
    out.push(Artifact::new("variational_check", t));
    out.note(format!("max_forward_reverse_gap: {:?}", fwd.sub(&rev)?.max_abs()));
    out.note(format!("max_forward_difference_gap: {:?}", fwd.sub(&fd)?.max_abs()));
    Ok(out)
}
