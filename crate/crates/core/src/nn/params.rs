//! Named parameter storage shared by all networks.

use ndarray::IxDyn;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tape::Arr;

/// Update-phase partition: generators (encoder + decoders) are written only
/// in phase 1 of a train step, discriminators only in phase 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Generator,
    Discriminator,
}

pub struct ParamEntry {
    pub name: String,
    pub group: ParamGroup,
    pub value: Arr,
}

/// Flat store of named parameter arrays, addressed by insertion index.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: ParamGroup, value: Arr) -> usize {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry { name, group, value });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, pid: usize) -> &ParamEntry {
        &self.entries[pid]
    }

    pub fn value(&self, pid: usize) -> &Arr {
        &self.entries[pid].value
    }

    pub fn value_mut(&mut self, pid: usize) -> &mut Arr {
        &mut self.entries[pid].value
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ParamEntry)> {
        self.entries.iter().enumerate()
    }

    pub fn ids_in_group(&self, group: ParamGroup) -> Vec<usize> {
        self.iter()
            .filter(|(_, e)| e.group == group)
            .map(|(i, _)| i)
            .collect()
    }

    /// Total number of scalar parameters across all arrays.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn scalar_count_in_group(&self, group: ParamGroup) -> usize {
        self.entries
            .iter()
            .filter(|e| e.group == group)
            .map(|e| e.value.len())
            .sum()
    }
}

pub fn gaussian_init<R: Rng>(shape: &[usize], std_dev: f64, rng: &mut R) -> Arr {
    let normal = Normal::new(0.0, std_dev).expect("valid std dev");
    Arr::from_shape_simple_fn(IxDyn(shape), || normal.sample(rng))
}

pub fn zeros_init(shape: &[usize]) -> Arr {
    Arr::zeros(IxDyn(shape))
}

pub fn ones_init(shape: &[usize]) -> Arr {
    Arr::from_elem(IxDyn(shape), 1.0)
}
