use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::N_CLASSES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mfi,
    Osnr,
}

impl Task {
    pub fn output_size(self) -> usize {
        match self {
            Task::Mfi => N_CLASSES,
            Task::Osnr => 1,
        }
    }

    pub fn output_activation(self) -> OutputActivation {
        match self {
            Task::Mfi => OutputActivation::Softmax,
            Task::Osnr => OutputActivation::Linear,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mfi => "mfi",
            Task::Osnr => "osnr",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Softmax,
    Linear,
}

/// Task-specific tail: private tanh layers and an output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub task: Task,
    pub hidden_sizes: Vec<usize>,
    pub output_size: usize,
    pub output_activation: OutputActivation,
}

impl Branch {
    pub fn new(task: Task, hidden_sizes: Vec<usize>) -> Self {
        Self {
            task,
            hidden_sizes,
            output_size: task.output_size(),
            output_activation: task.output_activation(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtlTopology {
    pub input_size: usize,
    pub shared_sizes: Vec<usize>,
    pub branches: Vec<Branch>,
}

fn half(n: usize) -> usize {
    n.div_ceil(2).max(1)
}

impl MtlTopology {
    /// Shared layer of `ceil(bins / 2)` neurons, each branch half of that.
    pub fn for_bins(bins: usize) -> Self {
        Self::with_shared(bins, half(bins))
    }

    /// Given shared width; branch hidden layers are `ceil(shared / 2)`.
    pub fn with_shared(bins: usize, shared: usize) -> Self {
        let h = half(shared);
        Self {
            input_size: bins,
            shared_sizes: vec![shared],
            branches: vec![
                Branch::new(Task::Mfi, vec![h]),
                Branch::new(Task::Osnr, vec![h]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_size == 0 || self.shared_sizes.contains(&0) {
            return bad("layer sizes must be >= 1".into());
        }
        if self.branches.is_empty() || self.branches.len() > 2 {
            return bad(format!("expected 1 or 2 branches, got {}", self.branches.len()));
        }
        if self.branches.len() == 2 && self.branches[0].task == self.branches[1].task {
            return bad("branches must serve different tasks".into());
        }
        for b in &self.branches {
            if b.hidden_sizes.contains(&0) {
                return bad(format!("{} branch has an empty hidden layer", b.task));
            }
            if b.output_size != b.task.output_size()
                || b.output_activation != b.task.output_activation()
            {
                return bad(format!("{} branch has the wrong output layer", b.task));
            }
        }
        Ok(())
    }

    pub fn branch_index(&self, task: Task) -> Option<usize> {
        self.branches.iter().position(|b| b.task == task)
    }

    pub fn has_task(&self, task: Task) -> bool {
        self.branch_index(task).is_some()
    }

    /// Width feeding the branches.
    pub fn trunk_width(&self) -> usize {
        *self.shared_sizes.last().unwrap_or(&self.input_size)
    }

    /// (fan_in, fan_out) of every layer: trunk first, then each branch.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = self.input_size;
        for &s in &self.shared_sizes {
            shapes.push((prev, s));
            prev = s;
        }
        let trunk = prev;
        for b in &self.branches {
            let mut prev = trunk;
            for &h in &b.hidden_sizes {
                shapes.push((prev, h));
                prev = h;
            }
            shapes.push((prev, b.output_size));
        }
        shapes
    }

    /// Layer index range of branch `i`.
    pub fn branch_layers(&self, i: usize) -> std::ops::Range<usize> {
        let mut start = self.shared_sizes.len();
        for b in &self.branches[..i] {
            start += b.hidden_sizes.len() + 1;
        }
        start..start + self.branches[i].hidden_sizes.len() + 1
    }

    /// Every layer width, input and outputs included.
    pub fn count_neurons(&self) -> usize {
        self.input_size
            + self.shared_sizes.iter().sum::<usize>()
            + self
                .branches
                .iter()
                .map(|b| b.hidden_sizes.iter().sum::<usize>() + b.output_size)
                .sum::<usize>()
    }

    pub fn count_parameters(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(fan_in, fan_out)| fan_in * fan_out + fan_out)
            .sum()
    }

    /// Keeps the trunk and only `task`'s branch.
    pub fn make_stl(&self, task: Task) -> Self {
        Self {
            input_size: self.input_size,
            shared_sizes: self.shared_sizes.clone(),
            branches: self
                .branches
                .iter()
                .filter(|b| b.task == task)
                .cloned()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizing() {
        let t = MtlTopology::for_bins(100);
        assert_eq!(t.shared_sizes, vec![50]);
        assert_eq!(t.branches[0].hidden_sizes, vec![25]);
        assert_eq!(t.branches[1].hidden_sizes, vec![25]);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn neuron_counts_at_reported_optima() {
        let mtl = MtlTopology::with_shared(100, 60);
        assert_eq!(mtl.count_neurons(), 224);
        let stl = MtlTopology::with_shared(200, 110).make_stl(Task::Osnr);
        assert_eq!(stl.count_neurons(), 366);
        assert_eq!(mtl.count_parameters(), 100 * 60 + 60 + 2 * (60 * 30 + 30) + 30 * 3 + 3 + 30 + 1);
    }

    #[test]
    fn stl_keeps_one_branch() {
        let t = MtlTopology::for_bins(100);
        let mfi = t.make_stl(Task::Mfi);
        assert_eq!(mfi.branches.iter().map(|b| b.output_size).collect::<Vec<_>>(), vec![3]);
        let osnr = t.make_stl(Task::Osnr);
        assert_eq!(osnr.branches.iter().map(|b| b.output_size).collect::<Vec<_>>(), vec![1]);
        assert!(mfi.validate().is_ok() && osnr.validate().is_ok());
    }

    #[test]
    fn layer_ranges() {
        let t = MtlTopology::for_bins(10);
        assert_eq!(t.layer_shapes().len(), 5);
        assert_eq!(t.branch_layers(0), 1..3);
        assert_eq!(t.branch_layers(1), 3..5);
    }

    #[test]
    fn invalid_topologies() {
        let mut t = MtlTopology::for_bins(10);
        t.branches[1].output_size = 2;
        assert!(t.validate().is_err());
        let mut t = MtlTopology::for_bins(10);
        t.branches[1].task = Task::Mfi;
        assert!(t.validate().is_err());
        let mut t = MtlTopology::for_bins(10);
        t.shared_sizes = vec![0];
        assert!(t.validate().is_err());
    }
}
