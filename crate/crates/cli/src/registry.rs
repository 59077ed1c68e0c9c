//! Everything `dyn-nn-lab list` prints. Each id is accepted by `run`.

use crate::experiments::{Experiment, EXPERIMENTS};

pub struct Entry {
    pub category: &'static str,
    pub id: &'static str,
    pub description: &'static str,
    /// Where a config uses it.
    pub via: &'static str,
}

const fn e(category: &'static str, id: &'static str, via: &'static str, description: &'static str) -> Entry {
    Entry { category, id, description, via }
}

const STATIC: [Entry; 22] = [
    e("graphons", "block", "graph.kind", "stochastic block graphon (graph.blocks, graph.inside, graph.outside)"),
    e("graphons", "constant", "graph.kind", "constant graphon W = graph.c"),
    e("graphons", "product", "graph.kind", "W(x, y) = x y"),
    e("losses", "prod2", "model.id", "two-point data for f(x) = θ1 θ2 x, squared loss"),
    e("losses", "quadratic", "model.id", "θᵀ diag(c) θ / 2 with c = model.curvature"),
    e("losses", "two-point-scalar", "model.id", "f(x) = θ x on data {(1, 0), (2, 0)}"),
    e("models", "cucker_smale", "model.id", "flocking with weight |p_i − p_j|^α"),
    e("models", "desai_zwanzig", "model.id", "double-well particles with linear attraction"),
    e("models", "hegselmann_krause", "model.id", "bounded-confidence opinion dynamics"),
    e("models", "hopfield_cts", "model.id", "continuous Hopfield network"),
    e("models", "kuramoto", "model.id", "phase oscillators on the circle"),
    e("models", "transformer", "model.id", "self-attention dynamics with seeded weights"),
    e("morse-fields", "affine", "morse.field", "x + 5, no critical points"),
    e("morse-fields", "circle", "morse.field", "x² + y² − 1, one Morse minimum"),
    e("morse-fields", "cube", "morse.field", "x³, one degenerate critical point"),
    e("morse-fields", "square", "morse.field", "x², one Morse minimum"),
    e("morse-fields", "tanh", "morse.field", "tanh x, no critical points"),
    e("morse-fields", "xor", "morse.field", "y² − x², one Morse saddle"),
    e("vector-fields", "decay", "network.field", "h' = −r h (decay:<r>)"),
    e("vector-fields", "linear", "network.field", "h' = a h (linear:<a>)"),
    e("vector-fields", "tanh-net", "network.field", "h' = tanh(A h + c), seeded (tanh-net:<seed>)"),
    e("vector-fields", "zero", "network.field", "h' = 0"),
];

/// All entries sorted by category, then id.
pub fn entries() -> Vec<Entry> {
    let mut all: Vec<Entry> = STATIC.into_iter().collect();
    all.extend(EXPERIMENTS.iter().map(|x| e("experiments", x.id, "experiment", x.description)));
    all.sort_by(|a, b| (a.category, a.id).cmp(&(b.category, b.id)));
    all
}

pub fn render() -> String {
    let all = entries();
    let w = all.iter().map(|e| e.id.len()).max().unwrap_or(0);
    let wc = all.iter().map(|e| e.category.len()).max().unwrap_or(0);
    all.iter().map(|e| format!("{:wc$}  {:w$}  {} [{}]\n", e.category, e.id, e.description, e.via)).collect()
}

/// `key = default  # help` for every key the experiment accepts.
pub fn render_keys(e: &Experiment) -> String {
    let lines: Vec<(String, &str)> = e
        .schema()
        .iter()
        .map(|k| (format!("{} = {}", k.name, if k.name == "experiment" { e.id } else { k.default }), k.help))
        .collect();
    let w = lines.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let mut s = format!("# {}: {}\n", e.id, e.description);
    for (lhs, help) in &lines {
        s.push_str(&format!("{lhs:w$}  # {help}\n"));
    }
    s
}
