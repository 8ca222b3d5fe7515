use crate::error::{Error, Result};

/// Lower-triangular record of `a[t][i]`: accuracy on task `i` after training
/// through task `t` (both zero-based here).
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    tasks: usize,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(tasks: usize) -> Self {
        Self { tasks, rows: Vec::with_capacity(tasks) }
    }

    /// Builds a matrix from explicit rows; row `t` must hold `t + 1` entries in `[0, 1]`.
    pub fn from_rows(tasks: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(tasks);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let t = self.rows.len();
        if t >= self.tasks {
            return Err(Error::State(format!("matrix already has all {} rows", self.tasks)));
        }
        if row.len() != t + 1 {
            return Err(Error::contract(format!("row {t} needs {} entries, got {}", t + 1, row.len())));
        }
        if let Some(bad) = row.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::contract(format!("accuracy {bad} outside [0, 1]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, t: usize, i: usize) -> Option<f64> {
        self.rows.get(t).and_then(|r| r.get(i)).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.tasks
    }

    pub fn final_row(&self) -> Option<&[f64]> {
        self.is_complete().then(|| self.rows.last().map(Vec::as_slice)).flatten()
    }
}

/// Mean accuracy over all tasks after the last one has been trained.
pub fn average_end_accuracy(m: &AccuracyMatrix) -> Result<f64> {
    let row = m
        .final_row()
        .ok_or_else(|| Error::State(format!("final row missing ({} of {} rows)", m.rows.len(), m.tasks)))?;
    Ok(row.iter().sum::<f64>() / row.len() as f64)
}
