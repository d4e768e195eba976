use std::io::Write;

use serde::{Deserialize, Serialize};

use super::LabError;

/// `loss[t][i] = L(f^(t+1), D_(i+1))` together with matching accuracies.
/// Unrecorded cells hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingLedger {
    loss: Vec<Vec<f64>>,
    accuracy: Vec<Vec<f64>>,
}

impl ForgettingLedger {
    pub fn new(tasks: usize) -> Self {
        Self {
            loss: vec![vec![f64::NAN; tasks]; tasks],
            accuracy: vec![vec![f64::NAN; tasks]; tasks],
        }
    }

    /// Builds a ledger from a square loss matrix; accuracies stay unset.
    pub fn from_losses(loss: Vec<Vec<f64>>) -> Result<Self, LabError> {
        let n = loss.len();
        if loss.iter().any(|r| r.len() != n) {
            return Err(LabError::Usage("loss matrix must be square".into()));
        }
        Ok(Self {
            accuracy: vec![vec![f64::NAN; n]; n],
            loss,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.loss.len()
    }

    pub fn record(&mut self, checkpoint: usize, task: usize, loss: f64, accuracy: f64) {
        self.loss[checkpoint][task] = loss;
        self.accuracy[checkpoint][task] = accuracy;
    }

    pub fn loss(&self, checkpoint: usize, task: usize) -> f64 {
        self.loss[checkpoint][task]
    }

    pub fn accuracy(&self, checkpoint: usize, task: usize) -> f64 {
        self.accuracy[checkpoint][task]
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.loss
    }

    pub fn accuracies(&self) -> &[Vec<f64>] {
        &self.accuracy
    }

    pub fn is_complete(&self) -> bool {
        self.loss.iter().flatten().all(|v| v.is_finite())
    }

    /// `F_i = loss[T][i] − loss[i][i]`.
    pub fn forgetting(&self) -> Result<Vec<f64>, LabError> {
        compute_forgetting(self)
    }

    /// Rows `checkpoint_t,task_i,loss,accuracy` (both 1-based).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LabError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["checkpoint_t", "task_i", "loss", "accuracy"])?;
        for (t, row) in self.loss.iter().enumerate() {
            for (i, l) in row.iter().enumerate() {
                w.write_record([
                    (t + 1).to_string(),
                    (i + 1).to_string(),
                    format!("{l:e}"),
                    format!("{:e}", self.accuracy[t][i]),
                ])?;
            }
        }
        w.flush().map_err(|e| LabError::Usage(e.to_string()))?;
        Ok(())
    }
}

pub fn compute_forgetting(ledger: &ForgettingLedger) -> Result<Vec<f64>, LabError> {
    let n = ledger.num_tasks();
    if n == 0 {
        return Err(LabError::Usage("ledger has no tasks".into()));
    }
    let last = n - 1;
    (0..n)
        .map(|i| {
            let (end, own) = (ledger.loss(last, i), ledger.loss(i, i));
            if !end.is_finite() || !own.is_finite() {
                return Err(LabError::Usage(format!(
                    "ledger incomplete: task {} lacks its own or final loss",
                    i + 1
                )));
            }
            Ok(end - own)
        })
        .collect()
}
