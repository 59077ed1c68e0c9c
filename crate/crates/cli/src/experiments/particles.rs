use std::f64::consts::TAU;
use std::sync::Arc;

use dyn_nn_lab::meanfield::{
    cucker_smale, desai_zwanzig, dobrushin_check, double_well_derivative, hegselmann_krause, hopfield_cts, kuramoto,
    meanfield_convergence_study, simulate_ips, simulate_sde_ips, transformer_ode, vlasov_kuramoto_solve, ConvergenceStudy,
    DensityGrid, GraphSpec, Graphon, IpsModel, PhaseSpace, Scheme, SimParams, VlasovParams,
};
use dyn_nn_lab::numerics::quadrature::gauss_hermite_normal;
use dyn_nn_lab::table::{Cell, Table};
use dyn_nn_lab::{Matrix64, SeededRng};
use serde::Deserialize;

use crate::config::{key, Config, Key};
use crate::error::{CliError, KeyContext};
use crate::output::{Artifact, Outcome, PlotSpec};

pub const MODEL_IDS: [&str; 6] = ["cucker_smale", "desai_zwanzig", "hegselmann_krause", "hopfield_cts", "kuramoto", "transformer"];
pub const GRAPHON_IDS: [&str; 3] = ["block", "constant", "product"];

const PI_TEXT: &str = "3.141592653589793";

fn graph_keys() -> Vec<Key> {
    vec![
        key("graph.kind", "all-to-all", "all-to-all | constant | product | block | file"),
        key("graph.c", "1", "all-to-all weight, or the constant graphon value"),
        key("graph.blocks", "2", "block graphon: number of communities"),
        key("graph.inside", "1", "block graphon: weight within a community"),
        key("graph.outside", "0", "block graphon: weight across communities"),
        key("graph.order", "4", "Gauss–Legendre order per cell for graphon averages"),
        key("graph.file", "", "JSON graph for graph.kind = file"),
    ]
}

/// `{"matrix": [[…]]}`, `{"graphon_id": "product"}` or
/// `{"graphon": {"kind": "block", …}}`, with an optional `"order"`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    #[serde(default)]
    matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    graphon_id: Option<String>,
    #[serde(default)]
    graphon: Option<Graphon>,
    #[serde(default)]
    order: Option<usize>,
}

fn graphon_by_id(id: &str, cfg: &Config, key_name: &str) -> Result<Graphon, CliError> {
    Ok(match id {
        "constant" => Graphon::Constant { c: cfg.finite("graph.c")? },
        "product" => Graphon::Product,
        "block" => Graphon::Block {
            blocks: cfg.usize_at_least("graph.blocks", 1)?,
            inside: cfg.finite("graph.inside")?,
            outside: cfg.finite("graph.outside")?,
        },
        other => return Err(CliError::config(key_name, format!("unknown graphon '{other}' (expected one of {})", GRAPHON_IDS.join(", ")))),
    })
}

fn load_graph(cfg: &Config) -> Result<GraphSpec, CliError> {
    let order = cfg.usize_at_least("graph.order", 1)?;
    match cfg.raw("graph.kind") {
        "all-to-all" => Ok(GraphSpec::AllToAll(cfg.finite("graph.c")?)),
        "file" => {
            let path = cfg.string("graph.file")?;
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::config("graph.file", format!("cannot read {path}: {e}")))?;
            let doc: GraphJson = serde_json::from_str(&text).map_err(|e| CliError::config("graph.file", e.to_string()))?;
            let order = doc.order.unwrap_or(order);
            match (doc.matrix, doc.graphon_id, doc.graphon) {
                (Some(rows), None, None) => Ok(GraphSpec::Explicit(Matrix64::from_rows(&rows).for_key("graph.file")?)),
                (None, Some(id), None) => Ok(GraphSpec::Graphon { graphon: graphon_by_id(&id, cfg, "graph.file")?, order }),
                (None, None, Some(graphon)) => Ok(GraphSpec::Graphon { graphon, order }),
                _ => Err(CliError::config("graph.file", "give exactly one of \"matrix\", \"graphon_id\" or \"graphon\"")),
            }
        }
        id => Ok(GraphSpec::Graphon { graphon: graphon_by_id(id, cfg, "graph.kind")?, order }),
    }
}

pub fn ips_keys() -> Vec<Key> {
    let mut k = vec![
        key("model.id", "kuramoto", "cucker_smale | desai_zwanzig | hegselmann_krause | hopfield_cts | kuramoto | transformer"),
        key("model.k", "1", "coupling strength K (transformer: scale of M3)"),
        key("model.omega", "0", "kuramoto frequencies, one per particle or one shared"),
        key("model.c", "1", "hegselmann_krause lower threshold c (inf allowed)"),
        key("model.d", "1", "hegselmann_krause upper threshold d (inf allowed)"),
        key("model.alpha", "1", "cucker_smale exponent α, or hopfield_cts decay α"),
        key("model.b", "0", "hopfield_cts inputs, one per particle or one shared"),
        key("model.dim", "2", "transformer token dimension"),
    ];
    k.extend(graph_keys());
    k.extend([
        key("ips.particles", "50", "number of particles M"),
        key("ips.init", "random", "random (uniform phases / Gaussian states) | equispaced"),
        key("ips.x0", "", "explicit initial state, particle-major (overrides ips.init)"),
        key("ips.spread", "1", "scale of the Euclidean initial states"),
        key("ips.dt", "0.01", "time step"),
        key("ips.t_end", "5", "horizon"),
        key("ips.record_every", "10", "record every n-th step"),
        key("ips.scheme", "rk4", "rk4 | euler (deterministic runs)"),
        key("ips.sigma", "0", "additive noise strength; positive values run Euler–Maruyama"),
    ]);
    k
}

fn per_particle(cfg: &Config, key_name: &str, m: usize) -> Result<Vec<f64>, CliError> {
    let v = cfg.list_f64(key_name)?;
    if v.len() != 1 && v.len() != m {
        return Err(CliError::config(key_name, format!("needs one value or one per particle ({m}), got {}", v.len())));
    }
    Ok(v)
}

fn load_ips_model(cfg: &Config, m: usize, rng: &SeededRng) -> Result<IpsModel, CliError> {
    let k = cfg.finite("model.k")?;
    match cfg.raw("model.id") {
        "kuramoto" => kuramoto(k, per_particle(cfg, "model.omega", m)?).for_key("model.omega"),
        "desai_zwanzig" => desai_zwanzig(double_well_derivative(), k).for_key("model.k"),
        "hegselmann_krause" => hegselmann_krause(k, cfg.f64("model.c")?, cfg.f64("model.d")?).for_key("model.c"),
        "cucker_smale" => cucker_smale(k, cfg.positive("model.alpha")?).for_key("model.alpha"),
        "hopfield_cts" => hopfield_cts(cfg.positive("model.alpha")?, per_particle(cfg, "model.b", m)?).for_key("model.b"),
        "transformer" => {
            let d = cfg.usize_at_least("model.dim", 1)?;
            let mut r = rng.child(1);
            let s = 1.0 / (d as f64).sqrt();
            let mut gauss = || Matrix64::new(d, d, (0..d * d).map(|_| s * r.normal()).collect()).expect("square");
            let (m1, m2) = (gauss(), gauss());
            transformer_ode(m1, m2, Matrix64::identity(d).scale(k)).for_key("model.dim")
        }
        other => Err(CliError::config("model.id", format!("unknown model '{other}' (expected one of {})", MODEL_IDS.join(", ")))),
    }
}

fn initial_state(cfg: &Config, model: &IpsModel, m: usize, rng: &SeededRng) -> Result<Vec<f64>, CliError> {
    let d = model.dim();
    let spread = cfg.positive("ips.spread")?;
    if cfg.is_set("ips.x0") {
        let x0 = cfg.list_f64("ips.x0")?;
        if x0.len() != m * d {
            return Err(CliError::config("ips.x0", format!("needs ips.particles × dim = {} values, got {}", m * d, x0.len())));
        }
        return Ok(x0);
    }
    let mut r = rng.child(0);
    let circle = model.phase_space == PhaseSpace::Circle;
    match cfg.raw("ips.init") {
        "random" => Ok((0..m * d).map(|_| if circle { TAU * r.uniform() } else { spread * r.normal() }).collect()),
        "equispaced" => Ok((0..m)
            .flat_map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                std::iter::repeat_n(if circle { TAU * u } else { spread * (2.0 * u - 1.0) }, d)
            })
            .collect()),
        other => Err(CliError::config("ips.init", format!("expected random or equispaced, got '{other}'"))),
    }
}

pub fn ips_simulate(cfg: &Config) -> Result<Outcome, CliError> {
    let rng = SeededRng::new(cfg.u64("seed")?);
    let m = cfg.usize_at_least("ips.particles", 1)?;
    let model = load_ips_model(cfg, m, &rng)?;
    let graph = load_graph(cfg)?;
    let x0 = initial_state(cfg, &model, m, &rng)?;
    let scheme = match cfg.raw("ips.scheme") {
        "rk4" => Scheme::Rk4,
        "euler" => Scheme::Euler,
        other => return Err(CliError::config("ips.scheme", format!("expected rk4 or euler, got '{other}'"))),
    };
    let params = SimParams::new(cfg.positive("ips.dt")?, cfg.positive("ips.t_end")?)
        .with_record_every(cfg.usize_at_least("ips.record_every", 1)?)
        .with_scheme(scheme);
    let sigma = cfg.nonnegative("ips.sigma")?;
    let tr = if sigma > 0.0 {
        let noisy = model.clone().with_noise(Arc::new(move |_, _, out: &mut [f64]| out.fill(sigma)));
        // the noisy solver divides explicit weights by M; undo that so the drift matches the deterministic run
        let drift_graph = match graph {
            GraphSpec::Explicit(a) => GraphSpec::Explicit(a.scale(m as f64)),
            g => g,
        };
        simulate_sde_ips(&noisy, &drift_graph, &GraphSpec::AllToAll(1.0), &x0, &params, &rng.child(2)).for_key("graph.kind")?
    } else {
        simulate_ips(&model, &graph, &x0, &params).for_key("graph.kind")?
    };
    let mut out = Outcome::default();
    out.push(Artifact::new("ips_state", tr.state_table()?));
    if tr.phase_space == PhaseSpace::Circle {
        let op = tr.order_parameter_table()?;
        let last = op.column_f64("order_parameter").and_then(|c| c.last().copied()).unwrap_or(f64::NAN);
        out.push(Artifact::new("ips_order_parameter", op).plotted(PlotSpec::new("t", &["order_parameter"])));
        out.note(format!("final_order_parameter: {last:?}"));
    }
    out.note(format!("model: {}", model.name));
    out.note(format!("recorded_times: {}", tr.times.len()));
    Ok(out)
}

fn frequency_keys() -> Vec<Key> {
    vec![
        key("freq.omega", "0", "natural frequencies ω_r"),
        key("freq.weights", "1", "their probabilities ζ_r"),
        key("freq.gaussian", "", "mean,sd,nodes: Gauss–Hermite quantisation of a Gaussian ζ (overrides freq.omega)"),
    ]
}

fn frequencies(cfg: &Config) -> Result<Vec<(f64, f64)>, CliError> {
    if cfg.is_set("freq.gaussian") {
        let g = cfg.list_f64("freq.gaussian")?;
        let [mean, sd, n] = g[..] else { return Err(CliError::config("freq.gaussian", "expected mean,sd,nodes")) };
        if !(n >= 1.0 && n.fract() == 0.0) {
            return Err(CliError::config("freq.gaussian", "node count must be a positive integer"));
        }
        let rule = gauss_hermite_normal(n as usize, mean, sd).for_key("freq.gaussian")?;
        return Ok(rule.nodes.into_iter().zip(rule.weights).collect());
    }
    let omega = cfg.list_f64("freq.omega")?;
    let weights = cfg.list_f64("freq.weights")?;
    if omega.len() != weights.len() {
        return Err(CliError::config("freq.weights", format!("needs one weight per frequency ({})", omega.len())));
    }
    Ok(omega.into_iter().zip(weights).collect())
}

fn bump(cfg: &Config, center_key: &str) -> Result<DensityGrid, CliError> {
    DensityGrid::bump(cfg.usize_at_least("grid.cells", 2)?, frequencies(cfg)?, cfg.finite(center_key)?, cfg.nonnegative("init.kappa")?)
        .for_key("grid.cells")
}

fn vlasov_params(cfg: &Config) -> Result<VlasovParams, CliError> {
    Ok(VlasovParams {
        k: cfg.finite("vlasov.k")?,
        t_end: cfg.positive("vlasov.t_end")?,
        dt: cfg.positive("vlasov.dt")?,
        record_every: cfg.usize_at_least("vlasov.record_every", 1)?,
    })
}

fn vlasov_keys_with(t_end: &'static str, dt: &'static str, record: &'static str) -> Vec<Key> {
    vec![
        key("vlasov.k", "1", "coupling K"),
        key("vlasov.t_end", t_end, "horizon"),
        key("vlasov.dt", dt, "time step; must satisfy the CFL bound"),
        key("vlasov.record_every", record, "record every n-th step"),
    ]
}

pub fn converge_keys() -> Vec<Key> {
    let mut k = vec![
        key("mf.ms", "100,400,1600", "particle counts M"),
        key("mf.seeds", "10", "independent samples per M"),
        key("mf.k", "1", "coupling K"),
        key("mf.t_end", "2", "horizon"),
        key("mf.dt", "0.01", "particle time step"),
        key("mf.sample_every", "10", "compare every n-th particle step"),
        key("grid.cells", "2048", "Vlasov grid cells"),
        key("init.center", PI_TEXT, "centre of the von Mises bump"),
        key("init.kappa", "1", "concentration of the bump"),
    ];
    k.extend(frequency_keys());
    k
}

pub fn meanfield_converge(cfg: &Config) -> Result<Outcome, CliError> {
    let ms = cfg.list_usize("mf.ms")?;
    if ms.contains(&0) {
        return Err(CliError::config("mf.ms", "particle counts must be positive"));
    }
    let study = ConvergenceStudy {
        ms,
        seeds: cfg.usize_at_least("mf.seeds", 1)?,
        k: cfg.finite("mf.k")?,
        t_end: cfg.positive("mf.t_end")?,
        dt: cfg.positive("mf.dt")?,
        sample_every: cfg.usize_at_least("mf.sample_every", 1)?,
        initial: bump(cfg, "init.center")?,
    };
    let rep = meanfield_convergence_study(&study, &SeededRng::new(cfg.u64("seed")?)).for_key("mf.dt")?;
    let mut seeds = Table::new(["M", "seed", "sup_w1"]);
    for r in &rep.rows {
        for (s, w) in r.per_seed.iter().enumerate() {
            seeds.push(vec![Cell::from(r.m), Cell::from(s), Cell::from(*w)])?;
        }
    }
    let mut out = Outcome::default();
    out.push(Artifact::new("meanfield_converge", rep.to_table()).plotted(PlotSpec::new("M", &["sup_w1"])));
    out.push(Artifact::new("meanfield_converge_seeds", seeds));
    out.note(format!("inversions: {}", rep.inversions()));
    out.note(format!("trend_ok: {}", rep.trend_ok()));
    out.note(format!("vlasov_dt: {:?}", rep.vlasov_dt));
    Ok(out)
}

pub fn dobrushin_keys() -> Vec<Key> {
    let mut k = vec![
        key("grid.cells", "1024", "grid cells"),
        key("init.center_a", "2", "centre of the first bump"),
        key("init.center_b", "2.6", "centre of the second bump"),
        key("init.kappa", "2", "concentration of both bumps"),
        key("dobrushin.lipschitz", "", "Lipschitz constant L in the bound; empty uses |vlasov.k|"),
    ];
    k.extend(vlasov_keys_with("2", "0.002", "50"));
    k.extend(frequency_keys());
    k
}

pub fn dobrushin(cfg: &Config) -> Result<Outcome, CliError> {
    let p = vlasov_params(cfg)?;
    let l = match cfg.opt_f64("dobrushin.lipschitz")? {
        Some(l) if l >= 0.0 => l,
        Some(l) => return Err(CliError::config("dobrushin.lipschitz", format!("must be nonnegative, got {l}"))),
        None => p.k.abs(),
    };
    let rep = dobrushin_check(&bump(cfg, "init.center_a")?, &bump(cfg, "init.center_b")?, &p, l).for_key("vlasov.dt")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("dobrushin", rep.to_table()).plotted(PlotSpec::new("t", &["w1", "bound"])));
    out.note(format!("w1_initial: {:?}", rep.w1_initial));
    out.note(format!("holds: {}", rep.holds));
    out.note(format!("worst_ratio: {:?}", rep.worst_ratio));
    out.note(format!("degenerate: {}", rep.degenerate));
    Ok(out)
}

pub fn vlasov_keys() -> Vec<Key> {
    let mut k = vec![
        key("grid.cells", "512", "grid cells"),
        key("init.profile", "bump", "bump | uniform"),
        key("init.center", PI_TEXT, "centre of the von Mises bump"),
        key("init.kappa", "1", "concentration of the bump"),
    ];
    k.extend(vlasov_keys_with("5", "0.005", "20"));
    k.extend(frequency_keys());
    k
}

pub fn vlasov(cfg: &Config) -> Result<Outcome, CliError> {
    let grid = match cfg.raw("init.profile") {
        "bump" => bump(cfg, "init.center")?,
        "uniform" => DensityGrid::uniform(cfg.usize_at_least("grid.cells", 2)?, frequencies(cfg)?).for_key("freq.weights")?,
        other => return Err(CliError::config("init.profile", format!("expected bump or uniform, got '{other}'"))),
    };
    let run = vlasov_kuramoto_solve(&grid, &vlasov_params(cfg)?).for_key("vlasov.dt")?;
    let mut out = Outcome::default();
    out.push(Artifact::new("vlasov_order_parameter", run.to_table()).plotted(PlotSpec::new("t", &["order_parameter"])));
    let last = run.densities.last().expect("initial density is recorded");
    for r in 0..last.frequencies().len() {
        out.push(Artifact::new(&format!("vlasov_density_{r}"), last.to_table(r)).plotted(PlotSpec::new("x", &["u"])));
    }
    out.note(format!("steps: {}", run.steps));
    out.note(format!("dt: {:?}", run.dt));
    out.note(format!("max_mass_drift: {:?}", run.max_mass_drift));
    out.note(format!("final_order_parameter: {:?}", last.order_parameter()));
    Ok(out)
}
