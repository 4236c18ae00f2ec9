//! Command-line overrides patched into the JSON config before validation,
//! so schema errors still name the offending field.

use std::path::PathBuf;

use clap::Args;
use serde_json::{Map, Value};

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Lattice type: chain or square.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Number of lattice sites.
    #[arg(long)]
    pub n: Option<u64>,
    /// Lattice spacing in units of λ₀.
    #[arg(long)]
    pub a: Option<f64>,
    /// Cumulant order (1–3).
    #[arg(long)]
    pub order: Option<u64>,
    /// Method: cumulant, mcwf or lindblad.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub n_traj: Option<u64>,
    /// Initial condition: full, partial or filling.
    #[arg(long)]
    pub mode: Option<String>,
    /// Initially excited emitters (implies --mode partial).
    #[arg(long)]
    pub n_exc: Option<u64>,
    /// Filling fraction (implies --mode filling).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Position disorder width in units of the spacing.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub n_samples: Option<u64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub sample_dt: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

/// Object stored under `key`, created (or replaced, if not an object) on demand.
pub fn entry<'a>(v: &'a mut Value, key: &str) -> &'a mut Map<String, Value> {
    if !v.is_object() {
        *v = Value::Object(Map::new());
    }
    let obj = v.as_object_mut().unwrap();
    let slot = obj.entry(key).or_insert_with(|| Value::Object(Map::new()));
    if !slot.is_object() {
        *slot = Value::Object(Map::new());
    }
    slot.as_object_mut().unwrap()
}

fn put(map: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        map.insert(key.into(), v);
    }
}

fn num(x: Option<f64>) -> Option<Value> {
    x.map(Value::from)
}

impl Overrides {
    pub fn apply(&self, v: &mut Value) {
        let geo = entry(v, "geometry");
        put(geo, "type", self.geometry.clone().map(Value::from));
        put(geo, "n", self.n.map(Value::from));
        put(geo, "a", num(self.a));

        let init = entry(v, "initial");
        if let Some(mode) = &self.mode {
            init.insert("mode".into(), mode.clone().into());
        }
        if let Some(k) = self.n_exc {
            init.insert("mode".into(), "partial".into());
            init.remove("eta");
            init.insert("n_exc".into(), k.into());
        }
        if let Some(eta) = self.eta {
            init.insert("mode".into(), "filling".into());
            init.remove("n_exc");
            init.insert("eta".into(), eta.into());
        }

        let dis = entry(v, "disorder");
        put(dis, "sigma", num(self.sigma));
        put(dis, "n_samples", self.n_samples.map(Value::from));

        let m = entry(v, "method");
        if let Some(kind) = &self.method {
            m.insert("kind".into(), kind.clone().into());
            if kind != "cumulant" {
                m.remove("order");
            }
        }
        put(m, "order", self.order.map(Value::from));
        put(m, "n_traj", self.n_traj.map(Value::from));

        let it = entry(v, "integration");
        put(it, "t_max", num(self.t_max));
        put(it, "sample_dt", num(self.sample_dt));
        put(it, "rtol", num(self.rtol));
        put(it, "atol", num(self.atol));

        let obj = v.as_object_mut().unwrap();
        put(obj, "seed", self.seed.map(Value::from));
        put(obj, "output_dir", self.output_dir.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        // drop sections that stayed empty so defaults apply
        obj.retain(|_, x| !matches!(x, Value::Object(m) if m.is_empty()));
    }
}
