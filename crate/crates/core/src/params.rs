//! Named parameter tensors, their binding onto a [`Graph`], and the weights
//! directory format (one `RDF1` file per tensor plus `index.json`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{rdf, Graph, Gradients, Tensor, Var};

pub const INDEX_FILE: &str = "index.json";

/// Parameters keyed by name, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    frozen: BTreeSet<String>,
}

/// Graph handles for every parameter of a store.
#[derive(Debug, Clone, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    file: String,
    shape: Vec<usize>,
    #[serde(default)]
    frozen: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    /// Adds every entry of `other` under `prefix`, keeping frozen flags.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ParamStore) {
        for (k, v) in other.params {
            if other.frozen.contains(&k) {
                self.frozen.insert(format!("{prefix}{k}"));
            }
            self.params.insert(format!("{prefix}{k}"), v);
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    /// Frozen parameters enter graphs as constants and are never updated.
    pub fn freeze(&mut self, name: &str) -> Result<()> {
        self.get(name)?;
        self.frozen.insert(name.to_string());
        Ok(())
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count.
    pub fn n_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn bind(&self, g: &mut Graph) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(k, t)| {
                let v = if self.frozen.contains(k) {
                    g.constant(t.clone())
                } else {
                    g.param(t.clone())
                };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Largest absolute element difference over parameters present in both.
    pub fn max_abs_diff(&self, other: &ParamStore) -> f64 {
        self.params
            .iter()
            .filter_map(|(k, t)| other.params.get(k).map(|o| t.max_abs_diff(o)))
            .fold(0.0, f64::max)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = BTreeMap::new();
        for (name, t) in &self.params {
            let file = format!("{}.rdf", name.replace(['/', '\\'], "_"));
            rdf::write(dir.join(&file), t)?;
            index.insert(
                name.clone(),
                IndexEntry {
                    file,
                    shape: t.shape().to_vec(),
                    frozen: self.frozen.contains(name),
                },
            );
        }
        let path = dir.join(INDEX_FILE);
        fs::write(&path, serde_json::to_string_pretty(&index)?).map_err(|e| Error::io(&path, e))
    }

    /// Loads a weights directory; values come back at the 32-bit storage precision.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<ParamStore> {
        let dir = dir.as_ref();
        let path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let index: BTreeMap<String, IndexEntry> = serde_json::from_str(&text)?;
        let mut store = ParamStore::new();
        for (name, entry) in index {
            let t = rdf::read(dir.join(&entry.file))?;
            if t.shape() != entry.shape.as_slice() {
                return Err(Error::Format {
                    what: "weights index",
                    detail: format!("{name}: index says {:?}, file has {:?}", entry.shape, t.shape()),
                });
            }
            if entry.frozen {
                store.frozen.insert(name.clone());
            }
            store.params.insert(name, t);
        }
        Ok(store)
    }
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no bound parameter named {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Accumulated gradients keyed like the store they belong to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradStore {
    grads: BTreeMap<String, Tensor>,
}

impl GradStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the gradients of every trainable bound parameter.
    pub fn accumulate(&mut self, store: &ParamStore, bound: &Bound, grads: &Gradients) -> Result<()> {
        for (name, var) in bound.iter() {
            if store.is_frozen(name) {
                continue;
            }
            let Some(g) = grads.get(var) else { continue };
            self.add(name, g)?;
        }
        Ok(())
    }

    pub fn add(&mut self, name: &str, g: &Tensor) -> Result<()> {
        match self.grads.get_mut(name) {
            Some(acc) => {
                if acc.shape() != g.shape() {
                    return Err(Error::shape("grad accumulate", acc.shape(), g.shape()));
                }
                acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b);
            }
            None => {
                self.grads.insert(name.to_string(), g.clone());
            }
        }
        Ok(())
    }

    /// Merges another accumulator; callers fix the merge order for determinism.
    pub fn merge(&mut self, other: GradStore) -> Result<()> {
        for (k, v) in other.grads {
            self.add(&k, &v)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for t in self.grads.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Zero-mean normal initializer with standard deviation `std`.
pub fn normal(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("finite std");
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

/// He-normal for a kernel whose fan-in is `fan_in`.
pub fn he_normal(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    normal(shape, (2.0 / fan_in as f64).sqrt(), rng)
}

/// Glorot-normal for a `[fan_in, fan_out]` matrix.
pub fn glorot_normal(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    normal(&[fan_in, fan_out], (2.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}
