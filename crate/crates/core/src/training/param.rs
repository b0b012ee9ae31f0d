use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::weights::WeightMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// `(Co, Ci, kh, kw)`; fan-in `Ci·kh·kw`.
    ConvKernel,
    /// `(F, G)`; fan-in `F`.
    DenseWeight,
    Bias,
}

/// A trainable tensor together with its gradient and Adam moments.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            name: name.into(),
            kind,
            grad: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            value,
            step_count: 0,
        }
    }

    pub fn fan_in(&self) -> usize {
        let s = self.value.shape();
        match self.kind {
            ParamKind::ConvKernel => s[1..].iter().product(),
            ParamKind::DenseWeight => s[0],
            ParamKind::Bias => 0,
        }
    }
}

/// He-normal initialization: `N(0, sqrt(2 / fan_in))` for kernels and dense
/// weights, zeros for biases.
pub fn init_he(param: &mut Parameter, rng: &mut Rng) {
    match param.kind {
        ParamKind::Bias => param.value.fill(0.0),
        ParamKind::ConvKernel | ParamKind::DenseWeight => {
            let std = (2.0 / param.fan_in() as f64).sqrt();
            for v in param.value.data_mut() {
                *v = rng.normal(0.0, std);
            }
        }
    }
}

/// Parameters keyed by their unique path name. Iteration is in name order,
/// which is the order the optimizer and the weight file use.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, param: Parameter) -> Result<()> {
        if self.params.contains_key(&param.name) {
            return Err(Error::Parameter {
                name: param.name,
                detail: "duplicate parameter name".into(),
            });
        }
        self.params.insert(param.name.clone(), param);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.params.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Parameter {
                name: name.into(),
                detail: "no such parameter".into(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.values_mut()
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

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.values_mut().for_each(|p| p.grad.fill(0.0));
    }

    /// Values only, in name order; the content of a weight file.
    pub fn to_weight_map(&self) -> WeightMap {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    /// Like [`ParamStore::to_weight_map`] restricted to names accepted by `keep`.
    pub fn weight_subset(&self, keep: impl Fn(&str) -> bool) -> WeightMap {
        self.params
            .iter()
            .filter(|(k, _)| keep(k))
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    /// Overwrites every parameter whose name is in `weights` and accepted by
    /// `select`; returns how many were written. Shapes are checked for all
    /// candidates before anything is written, so a failure leaves the store
    /// untouched.
    pub fn apply_weights(
        &mut self,
        weights: &WeightMap,
        select: impl Fn(&str) -> bool,
    ) -> Result<usize> {
        let mut matched = Vec::new();
        for (name, value) in weights {
            if !select(name) {
                continue;
            }
            if let Some(p) = self.params.get(name) {
                if p.value.shape() != value.shape() {
                    return Err(Error::Parameter {
                        name: name.clone(),
                        detail: format!(
                            "shape mismatch: model has {:?}, weights have {:?}",
                            p.value.shape(),
                            value.shape()
                        ),
                    });
                }
                matched.push(name);
            }
        }
        for name in &matched {
            let p = self.params.get_mut(*name).expect("checked above");
            p.value = weights[*name].clone();
        }
        Ok(matched.len())
    }

    /// Loads a complete set of weights: every parameter must be present
    /// with the right shape and no unknown names may appear.
    pub fn load_exact(&mut self, weights: &WeightMap) -> Result<()> {
        for name in self.params.keys() {
            if !weights.contains_key(name) {
                return Err(Error::Parameter {
                    name: name.clone(),
                    detail: "missing from weight file".into(),
                });
            }
        }
        if let Some(extra) = weights.keys().find(|k| !self.params.contains_key(*k)) {
            return Err(Error::Parameter {
                name: extra.clone(),
                detail: "weight file entry has no matching model parameter".into(),
            });
        }
        self.apply_weights(weights, |_| true)?;
        Ok(())
    }
}
