use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

/// Labelled train and test images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Image>,
    pub test: Vec<Image>,
}

impl Dataset {
    /// Distinct class ids present in the training split, ascending.
    pub fn classes(&self) -> Vec<u32> {
        self.train.iter().filter_map(Image::label).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Side and channel count shared by every image, if they agree.
    pub fn geometry(&self) -> Result<(usize, usize)> {
        let first = self
            .train
            .first()
            .ok_or_else(|| Error::config("dataset has no training images"))?;
        let side = first.side().ok_or_else(|| Error::config("dataset images must be square"))?;
        let c = first.channels();
        if let Some(odd) = self.train.iter().chain(&self.test).find(|x| x.side() != Some(side) || x.channels() != c) {
            return Err(Error::config(format!(
                "dataset mixes image shapes: {}x{}x{} and {side}x{side}x{c}",
                odd.height(),
                odd.width(),
                odd.channels()
            )));
        }
        Ok((side, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub classes: Vec<u32>,
    pub train: Vec<Image>,
    pub test: Vec<Image>,
}

/// Ordered tasks with pairwise disjoint class sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn train_len(&self) -> usize {
        self.tasks.iter().map(|t| t.train.len()).sum()
    }

    /// Largest label anywhere in the stream, plus one.
    pub fn class_span(&self) -> usize {
        self.tasks.iter().flat_map(|t| &t.classes).map(|&c| c as usize + 1).max().unwrap_or(0)
    }
}

/// Assigns shuffled classes to `tasks` groups of `classes_per_task` and
/// shuffles the training order inside every task. Classes beyond
/// `tasks * classes_per_task` are left out.
pub fn split_tasks(data: &Dataset, tasks: usize, classes_per_task: usize, rng: &mut Rng) -> Result<TaskStream> {
    if tasks == 0 || classes_per_task == 0 {
        return Err(Error::config("task count and classes per task must be at least 1"));
    }
    let mut classes = data.classes();
    let need = tasks * classes_per_task;
    if need > classes.len() {
        return Err(Error::config(format!(
            "{tasks} tasks x {classes_per_task} classes needs {need} classes, dataset has {}",
            classes.len()
        )));
    }
    rng.shuffle(&mut classes);

    let mut task_of: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out: Vec<Task> = (0..tasks)
        .map(|t| {
            let mut cs = classes[t * classes_per_task..(t + 1) * classes_per_task].to_vec();
            cs.sort_unstable();
            for &c in &cs {
                task_of.insert(c, t);
            }
            Task { classes: cs, train: Vec::new(), test: Vec::new() }
        })
        .collect();

    for x in &data.train {
        if let Some(&t) = x.label().and_then(|l| task_of.get(&l)) {
            out[t].train.push(x.clone());
        }
    }
    for x in &data.test {
        if let Some(&t) = x.label().and_then(|l| task_of.get(&l)) {
            out[t].test.push(x.clone());
        }
    }
    for task in &mut out {
        rng.shuffle(&mut task.train);
    }
    Ok(TaskStream { tasks: out })
}
